use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tailhazard::backtest::{run_backtest, AucRow, Sample, SpecReport, Variant, WindowFit};
use tailhazard::copula::{best_fit, fit_both, CopulaFamily, CopulaFit, CopulaFitOptions, PseudoSample};
use tailhazard::events::{
    describe, extract_events, pearson_test, read_events, write_events, Correlation, DescriptiveStats, Pairing, Side,
};
use tailhazard::hazard::{HazardModel, HazardQuery};
use tailhazard::ingest::{load_series, ReturnSeries};
use tailhazard::marginals::{fit_all_ri, fit_gpd, GpdFit, GpdFitOptions, RiFamily, RiFit, RiFitOptions};
use tailhazard::optim::LineSearch;
use tailhazard::synth::{embed_in_returns, sample_event_process, GeneratorSpec, PRNG_NAME};
use tailhazard::{BacktestConfig, Error, ExtremeSpec};

use crate::config::{InputFormat, RunConfig};
use crate::output::{emit, emit_json, write_atomic};

/// Tags a library error with its module so the error report can name it.
fn lib<E: Into<Error>>(e: E) -> anyhow::Error {
    anyhow::Error::new(e.into())
}

pub fn load_returns(path: &Path, format: InputFormat) -> Result<ReturnSeries<f64>> {
    let ctx = || format!("loading {}", path.display());
    match format.series_format() {
        Some(f) => load_series::<f64>(path, f).and_then(|s| s.into_returns()).map_err(lib).with_context(ctx),
        None => {
            let file = std::fs::File::open(path).with_context(ctx)?;
            let events = read_events::<f64, _>(file, 0.0).map_err(lib).with_context(ctx)?;
            let len = events.indices().last().expect("non-empty") + 1;
            let r = embed_in_returns(&events, len, 0.0).map_err(lib).with_context(ctx)?;
            ReturnSeries::with_synthetic_dates(r).map_err(lib).with_context(ctx)
        }
    }
}

fn extreme_spec(quantile: f64, side: Side) -> Result<ExtremeSpec> {
    ExtremeSpec::new(quantile, side).map_err(lib).context("defining extremes")
}

#[derive(Serialize)]
struct ExtractStats {
    label: String,
    threshold: f64,
    events: usize,
    tau: DescriptiveStats<f64>,
    y: DescriptiveStats<f64>,
}

pub struct ExtractArgs {
    pub input: PathBuf,
    pub format: InputFormat,
    pub quantile: f64,
    pub side: Side,
    pub out: Option<PathBuf>,
    pub stats: Option<PathBuf>,
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let series = load_returns(&a.input, a.format)?;
    let spec = extreme_spec(a.quantile, a.side)?;
    let threshold = spec.threshold(series.returns()).map_err(lib)?;
    let events = extract_events(series.returns(), &spec, threshold).map_err(lib).context("extracting extremes")?;
    let mut csv = Vec::new();
    write_events(&mut csv, &events).map_err(lib)?;
    emit(&csv, a.out.as_deref())?;
    if let Some(path) = a.stats {
        let stats = ExtractStats {
            label: spec.label(),
            threshold,
            events: events.len(),
            tau: describe(&events.tau_values()).map_err(lib).context("describing recurrence intervals")?,
            y: describe(events.y()).map_err(lib).context("describing exceeding sizes")?,
        };
        emit_json(&stats, Some(&path))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FitStats {
    tau: DescriptiveStats<f64>,
    y: DescriptiveStats<f64>,
}

/// The part of a fit report that `hazard --fit` reads back.
#[derive(Deserialize)]
struct FitModels {
    selected: CopulaFamily,
    models: BTreeMap<CopulaFamily, HazardModel<f64>>,
}

/// One row of a fit table: shape parameters of the three interval laws,
/// the size law and both copulas.
#[derive(Serialize)]
struct FitTableRow {
    mu: Option<f64>,
    q: Option<f64>,
    alpha: Option<f64>,
    xi: f64,
    phi: f64,
    theta_f: Option<f64>,
    theta_a: Option<f64>,
    #[serde(rename = "RMSE_f")]
    rmse_f: Option<f64>,
    #[serde(rename = "RMSE_a")]
    rmse_a: Option<f64>,
    #[serde(rename = "AIC_f")]
    aic_f: Option<f64>,
    #[serde(rename = "AIC_a")]
    aic_a: Option<f64>,
}

#[derive(Serialize)]
struct FitReport {
    label: String,
    spec: ExtremeSpec,
    threshold: f64,
    events: usize,
    pairing: Pairing,
    ri_family: RiFamily,
    table: FitTableRow,
    stats: FitStats,
    correlation: Option<Correlation<f64>>,
    ri: Vec<RiFit<f64>>,
    gpd: GpdFit<f64>,
    copulas: Vec<CopulaFit<f64>>,
    selected: CopulaFamily,
    /// Ready-to-use hazard models, keyed by copula family.
    models: BTreeMap<CopulaFamily, HazardModel<f64>>,
    warnings: Vec<String>,
}

pub struct FitArgs {
    pub input: PathBuf,
    pub format: InputFormat,
    pub quantile: f64,
    pub side: Side,
    pub pairing: Pairing,
    pub ri_family: RiFamily,
    pub exact_grid: bool,
    pub out: Option<PathBuf>,
}

fn search(exact_grid: bool) -> LineSearch {
    if exact_grid {
        LineSearch::exact_grid()
    } else {
        LineSearch::default()
    }
}

pub fn fit(a: FitArgs) -> Result<()> {
    let series = load_returns(&a.input, a.format)?;
    let spec = extreme_spec(a.quantile, a.side)?;
    let label = spec.label();
    let threshold = spec.threshold(series.returns()).map_err(lib)?;
    let events = extract_events(series.returns(), &spec, threshold).map_err(lib).context("extracting extremes")?;
    let mut warnings = Vec::new();

    let ri_opts = RiFitOptions { search: search(a.exact_grid), ..RiFitOptions::default() };
    let tau = events.tau_values();
    let ri = fit_all_ri(&tau, &ri_opts).map_err(lib).context("fitting recurrence intervals")?;
    for f in &ri {
        if f.at_boundary {
            warnings.push(format!("{label}: {} shape on the search boundary", f.model.family()));
        }
    }
    let gpd = fit_gpd(events.y(), &GpdFitOptions::default()).map_err(lib).context("fitting exceeding sizes")?;
    let chosen = ri.iter().find(|f| f.model.family() == a.ri_family).expect("all families fitted");

    let (ptau, py) = events.paired(a.pairing);
    let ps = PseudoSample::from_marginals(&ptau, &py, &chosen.model, &gpd.model).map_err(lib)?;
    if ps.clamped() > 0 {
        warnings.push(format!("{label}: {} pseudo-observations clamped into the open unit square", ps.clamped()));
    }
    let copula_opts = CopulaFitOptions { search: search(a.exact_grid), ..CopulaFitOptions::default() };
    let mut copulas = Vec::new();
    for (family, result) in CopulaFamily::ALL.into_iter().zip(fit_both(&ps, &copula_opts)) {
        match result {
            Ok(f) => {
                if f.at_boundary {
                    warnings.push(format!("{label}: {family} theta on the search boundary"));
                }
                if f.aic_guarded {
                    warnings.push(format!("{label}: {family} AIC guarded against a zero squared error"));
                }
                copulas.push(f);
            }
            Err(e) => warnings.push(format!("{label}: {family} copula fit failed: {e}")),
        }
    }
    let Some(best) = best_fit(&copulas) else {
        bail!(lib(tailhazard::copula::CopulaError::Degenerate("both copula fits failed")));
    };
    let selected = best.family();
    let theta = |fam| copulas.iter().find(|c| c.family() == fam);
    let shape = |fam| ri.iter().find(|f| f.model.family() == fam).map(|f| f.model.shape());
    let table = FitTableRow {
        mu: shape(RiFamily::StretchedExponential),
        q: shape(RiFamily::QExponential),
        alpha: shape(RiFamily::Weibull),
        xi: gpd.model.xi,
        phi: gpd.model.phi,
        theta_f: theta(CopulaFamily::Frank).map(|c| c.theta()),
        theta_a: theta(CopulaFamily::Amh).map(|c| c.theta()),
        rmse_f: theta(CopulaFamily::Frank).map(|c| c.rmse),
        rmse_a: theta(CopulaFamily::Amh).map(|c| c.rmse),
        aic_f: theta(CopulaFamily::Frank).map(|c| c.aic),
        aic_a: theta(CopulaFamily::Amh).map(|c| c.aic),
    };
    let stats = FitStats {
        tau: describe(&tau).map_err(lib).context("describing recurrence intervals")?,
        y: describe(events.y()).map_err(lib).context("describing exceeding sizes")?,
    };
    let correlation = match pearson_test(&ptau, &py) {
        Ok(c) => Some(c),
        Err(e) => {
            warnings.push(format!("{label}: tau-y correlation unavailable: {e}"));
            None
        }
    };
    let models = copulas.iter().map(|c| (c.family(), HazardModel::new(chosen.model, gpd.model, c.copula))).collect();
    let report = FitReport {
        label,
        spec,
        threshold,
        events: events.len(),
        pairing: a.pairing,
        ri_family: a.ri_family,
        table,
        stats,
        correlation,
        ri,
        gpd,
        copulas,
        selected,
        models,
        warnings,
    };
    emit_json(&report, a.out.as_deref())
}

pub struct HazardArgs {
    pub fit: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub copula: Option<CopulaFamily>,
    pub t: f64,
    pub dt: f64,
    pub y_last: f64,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct HazardReport {
    t: f64,
    dt: f64,
    y_last: f64,
    #[serde(rename = "W")]
    w: f64,
    #[serde(rename = "Wy")]
    wy: f64,
    model: HazardModel<f64>,
    warnings: Vec<String>,
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn hazard(a: HazardArgs) -> Result<()> {
    let model: HazardModel<f64> = match (&a.fit, &a.model) {
        (Some(path), None) => {
            let fit: FitModels = read_json(path)?;
            let family = a.copula.unwrap_or(fit.selected);
            *fit.models.get(&family).with_context(|| format!("{} has no {family} model", path.display()))?
        }
        (None, Some(path)) => {
            let m: HazardModel<f64> = read_json(path)?;
            if let Some(family) = a.copula.filter(|&f| f != m.copula.family) {
                bail!("--copula {family} does not match the {} copula in {}", m.copula.family, path.display());
            }
            m
        }
        _ => bail!("exactly one of --fit and --model is required"),
    };
    let q = HazardQuery::new(a.t, a.dt, a.y_last).map_err(lib)?;
    let pair = model.evaluate(&q).map_err(lib)?;
    let warnings = [("W", pair.w.warning), ("Wy", pair.wy.warning)]
        .into_iter()
        .filter_map(|(name, w)| w.map(|w| format!("{name}: {}", w.message())))
        .collect();
    let report = HazardReport { t: a.t, dt: a.dt, y_last: a.y_last, w: pair.w.value, wy: pair.wy.value, model, warnings };
    emit_json(&report, a.out.as_deref())
}

pub struct SimulateArgs {
    pub spec: PathBuf,
    pub out: PathBuf,
    pub returns: Option<PathBuf>,
    pub days: Option<usize>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
}

#[derive(Serialize)]
struct SimulateReport {
    prng: &'static str,
    spec: GeneratorSpec<f64>,
    events: usize,
    last_index: usize,
    return_days: Option<usize>,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut spec: GeneratorSpec<f64> = read_json(&a.spec)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(n) = a.n {
        spec.n = n;
    }
    let events = sample_event_process(&spec).map_err(lib).context("sampling the event process")?;
    let mut csv = Vec::new();
    write_events(&mut csv, &events).map_err(lib)?;
    write_atomic(&a.out, &csv)?;
    let last_index = *events.indices().last().expect("non-empty");
    let mut return_days = None;
    if let Some(path) = &a.returns {
        let len = a.days.unwrap_or(last_index + 1);
        let r = embed_in_returns(&events, len, 0.0).map_err(lib)?;
        let dates = tailhazard::ingest::weekday_calendar(len);
        let mut buf = Vec::new();
        tailhazard::ingest::write_series(&mut buf, &dates, &r).map_err(lib)?;
        write_atomic(path, &buf)?;
        return_days = Some(len);
    }
    let report = SimulateReport { prng: PRNG_NAME, spec, events: events.len(), last_index, return_days };
    emit_json(&report, None)
}

/// Command-line overrides of a [`RunConfig`].
#[derive(Default)]
pub struct BacktestOverrides {
    pub input: Option<PathBuf>,
    pub format: Option<InputFormat>,
    pub out_dir: Option<PathBuf>,
    pub quantiles: Vec<f64>,
    pub sides: Vec<Side>,
    pub split: Option<f64>,
    pub dt: Option<usize>,
    pub refit_every: Option<usize>,
    pub copula: Option<tailhazard::backtest::CopulaChoice>,
    pub ri_family: Option<RiFamily>,
    pub pairing: Option<Pairing>,
    pub fixed_threshold: bool,
    pub exact_grid: bool,
    pub min_intervals: Option<usize>,
    pub copula_theta: Option<f64>,
}

impl BacktestOverrides {
    pub fn apply(self, mut cfg: RunConfig) -> Result<RunConfig> {
        macro_rules! set {
            ($src:expr, $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        if self.input.is_some() {
            cfg.input = self.input;
        }
        set!(self.format, cfg.format);
        set!(self.out_dir, cfg.output_dir);
        let b = &mut cfg.backtest;
        if !self.quantiles.is_empty() {
            let sides = match self.sides.len() {
                0 => vec![Side::Positive; self.quantiles.len()],
                1 => vec![self.sides[0]; self.quantiles.len()],
                k if k == self.quantiles.len() => self.sides,
                k => bail!("{k} --side values for {} --quantile values", self.quantiles.len()),
            };
            b.quantiles =
                self.quantiles.iter().zip(sides).map(|(&q, s)| extreme_spec(q, s)).collect::<Result<_>>()?;
        } else if !self.sides.is_empty() {
            bail!("--side needs --quantile");
        }
        set!(self.split, b.split);
        set!(self.dt, b.dt);
        set!(self.refit_every, b.refit_every);
        set!(self.copula, b.copula_choice);
        set!(self.ri_family, b.ri_family);
        set!(self.pairing, b.pairing);
        set!(self.min_intervals, b.min_intervals);
        if self.fixed_threshold {
            b.fixed_threshold = true;
        }
        if self.exact_grid {
            b.search = LineSearch::exact_grid();
        }
        if self.copula_theta.is_some() {
            b.copula_theta = self.copula_theta;
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct SpecSummary<'a> {
    label: &'a str,
    spec: &'a ExtremeSpec,
    in_sample_days: usize,
    out_of_sample_days: usize,
    in_sample_extremes: usize,
    out_of_sample_extremes: usize,
    auc_m: BTreeMap<&'static str, BTreeMap<&'static str, f64>>,
    fits: &'a [WindowFit<f64>],
    warnings: &'a [String],
}

#[derive(Serialize)]
struct BacktestSummary<'a> {
    input: Option<&'a Path>,
    format: InputFormat,
    config: &'a BacktestConfig,
    days: usize,
    split_index: usize,
    split_date: Option<NaiveDate>,
    auc_table: Vec<AucRow<f64>>,
    results: Vec<SpecSummary<'a>>,
    warnings: &'a [String],
}

fn sample_key(s: Sample) -> &'static str {
    match s {
        Sample::InSample => "in_sample",
        Sample::OutOfSample => "out_of_sample",
    }
}

fn summarize(spec: &SpecReport<f64>) -> SpecSummary<'_> {
    let count = |s: Sample, extreme: bool| spec.days.iter().filter(|d| d.sample == s && (!extreme || d.extreme)).count();
    let auc_m = Variant::ALL
        .into_iter()
        .map(|v| {
            let row = [Sample::InSample, Sample::OutOfSample].into_iter().map(|s| (sample_key(s), spec.auc_m(v, s)));
            (v.name(), row.collect())
        })
        .collect();
    SpecSummary {
        label: &spec.label,
        spec: &spec.spec,
        in_sample_days: count(Sample::InSample, false),
        out_of_sample_days: count(Sample::OutOfSample, false),
        in_sample_extremes: count(Sample::InSample, true),
        out_of_sample_extremes: count(Sample::OutOfSample, true),
        auc_m,
        fits: &spec.fits,
        warnings: &spec.warnings,
    }
}

fn hazard_csv(spec: &SpecReport<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "t", "y_last", "W", "Wy", "extreme"])?;
    for d in &spec.days {
        let f = &d.forecast;
        w.write_record([
            d.date.format("%Y-%m-%d").to_string(),
            f.t.to_string(),
            f.y_last.to_string(),
            f.w.to_string(),
            f.wy.to_string(),
            u8::from(d.extreme).to_string(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn roc_csv(spec: &SpecReport<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variant", "qp", "A", "D"])?;
    for r in &spec.roc {
        let name = format!("{}.{}", r.variant.name(), sample_key(r.sample));
        for p in &r.curve.points {
            w.write_record([name.clone(), p.qp.to_string(), p.a.to_string(), p.d.to_string()])?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn backtest(config: Option<PathBuf>, overrides: BacktestOverrides) -> Result<()> {
    let base = match &config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = overrides.apply(base)?;
    let Some(input) = cfg.input.as_deref() else {
        bail!("no input series: pass --input or set `input` in the config file");
    };
    let series = load_returns(input, cfg.format)?;
    let report = run_backtest(&series, &cfg.backtest).map_err(lib).context("running the backtest")?;

    let dir = &cfg.output_dir;
    let single = report.results.len() == 1;
    for spec in &report.results {
        let suffix = if single { String::new() } else { format!("_{}", spec.label) };
        write_atomic(&dir.join(format!("hazard{suffix}.csv")), &hazard_csv(spec)?)?;
        write_atomic(&dir.join(format!("roc{suffix}.csv")), &roc_csv(spec)?)?;
    }
    let summary = BacktestSummary {
        input: cfg.input.as_deref(),
        format: cfg.format,
        config: &cfg.backtest,
        days: report.days,
        split_index: report.split_index,
        split_date: report.split_date,
        auc_table: report.auc_table(),
        results: report.results.iter().map(summarize).collect(),
        warnings: &report.warnings,
    };
    write_atomic(&dir.join("report.json"), &crate::output::to_json(&summary)?)?;
    for r in &summary.auc_table {
        println!("{}\t{}\tin_sample={}\tout_of_sample={}", r.label, r.variant.name(), r.in_sample, r.out_of_sample);
    }
    Ok(())
}
