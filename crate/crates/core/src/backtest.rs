//! Expanding-window forecasting of extremes: daily hazard series, alarms over
//! a sweep of hazard thresholds, confusion counts, ROC curves and AUCₘ.
//!
//! The first `floor(split·n)` days form the initial training window. Every
//! later day d is forecast from a fit on the days before the most recent
//! refit day f(d) ≤ d, where refits happen every `refit_every` days counted
//! from the split. The extreme threshold is re-estimated on each training
//! window unless `fixed_threshold` is set. In-sample days are evaluated with
//! the fit on the full initial window.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copula::{
    best_fit, fit_copula, goodness_of_fit, Copula, CopulaError, CopulaFamily, CopulaFit, CopulaFitOptions,
    PseudoSample,
};
use crate::events::{extract_events, EventsError, ExtremeSpec, Pairing, Side};
use crate::hazard::{hazard_joint, hazard_ri, HazardError, HazardModel, HazardQuery, HazardWarning};
use crate::ingest::ReturnSeries;
use crate::marginals::{fit_gpd, fit_ri, GpdFit, GpdFitOptions, MarginalError, RiFamily, RiFit, RiFitOptions};
use crate::optim::LineSearch;
use crate::scalar::Real;

/// Upper end of the false-alarm range integrated by AUCₘ.
pub const AUC_LIMIT: f64 = 0.3;
/// Evenly spaced Q_p values in the default sweep.
pub const DEFAULT_QP_POINTS: usize = 201;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest config: {0}")]
    InvalidConfig(String),
    #[error("{label}: {intervals} recurrence intervals in the training window ending at day {end}, need {min}")]
    InsufficientEvents { label: String, end: usize, intervals: usize, min: usize },
    #[error("hazard ({hazard}) and truth ({truth}) differ in length")]
    LengthMismatch { hazard: usize, truth: usize },
    #[error("ROC needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("day {day} precedes the forecast origin {origin}")]
    BeforeOrigin { day: usize, origin: usize },
    #[error(transparent)]
    Events(#[from] EventsError),
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error(transparent)]
    Hazard(#[from] HazardError),
}

/// Copula whose hazard fills the `Wy` column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaChoice {
    Frank,
    Amh,
    /// Per training window, the family preferred by AIC, then RMSE.
    #[default]
    Auto,
}

impl std::str::FromStr for CopulaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frank" => Ok(CopulaChoice::Frank),
            "amh" => Ok(CopulaChoice::Amh),
            "auto" => Ok(CopulaChoice::Auto),
            other => Err(format!("unknown copula choice `{other}` (expected frank|amh|auto)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BacktestConfig<T: Real> {
    /// Fraction of days in the initial training window.
    pub split: T,
    /// Forecast horizon Δt in days.
    pub dt: usize,
    pub quantiles: Vec<ExtremeSpec<T>>,
    pub refit_every: usize,
    /// Alarm thresholds; when absent, 201 evenly spaced values in [0, 1]
    /// plus every distinct hazard value.
    pub qp_grid: Option<Vec<T>>,
    pub copula_choice: CopulaChoice,
    pub ri_family: RiFamily,
    pub pairing: Pairing,
    /// Keep the threshold of the initial window for every later day.
    pub fixed_threshold: bool,
    pub min_intervals: usize,
    /// Use this θ for both copulas instead of fitting it.
    pub copula_theta: Option<T>,
    pub search: LineSearch,
}

impl<T: Real> Default for BacktestConfig<T> {
    fn default() -> Self {
        Self {
            split: T::lit(0.7),
            dt: 1,
            quantiles: vec![ExtremeSpec { quantile: T::lit(0.9), side: Side::Positive }],
            refit_every: 1,
            qp_grid: None,
            copula_choice: CopulaChoice::Auto,
            ri_family: RiFamily::QExponential,
            pairing: Pairing::End,
            fixed_threshold: false,
            min_intervals: 10,
            copula_theta: None,
            search: LineSearch::default(),
        }
    }
}

impl<T: Real> BacktestConfig<T> {
    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |m: String| Err(BacktestError::InvalidConfig(m));
        if !(self.split > T::zero() && self.split < T::one()) {
            return bad(format!("split {} outside (0, 1)", self.split));
        }
        if self.dt < 1 {
            return bad("dt must be at least 1 day".into());
        }
        if self.refit_every < 1 {
            return bad("refit_every must be at least 1".into());
        }
        if self.quantiles.is_empty() {
            return bad("no extreme definitions given".into());
        }
        for q in &self.quantiles {
            q.validate()?;
        }
        if let Some(grid) = &self.qp_grid {
            let sorted = grid.windows(2).all(|w| w[0] <= w[1]);
            let in_range = grid.iter().all(|&x| x >= T::zero() && x <= T::one());
            let ends = grid.first() == Some(&T::zero()) && grid.last() == Some(&T::one());
            if !(sorted && in_range && ends) {
                return bad("qp_grid must be sorted within [0, 1] and start at 0 and end at 1".into());
            }
        }
        if let Some(theta) = self.copula_theta {
            for family in CopulaFamily::ALL {
                Copula::new(family, theta)?;
            }
        }
        if self.min_intervals < 2 {
            return bad("min_intervals must be at least 2".into());
        }
        Ok(())
    }

    fn split_index(&self, n: usize) -> usize {
        (self.split * T::from_count(n)).floor().to_usize().unwrap_or(0)
    }

    /// The refit day whose fit forecasts day `d ≥ origin`.
    pub fn refit_day(&self, d: usize, origin: usize) -> usize {
        origin + (d - origin) / self.refit_every * self.refit_every
    }
}

/// All model components fitted on one training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct WindowFit<T: Real> {
    /// The window is days `0..end`.
    pub end: usize,
    pub threshold: T,
    pub events: usize,
    pub ri: RiFit<T>,
    pub gpd: GpdFit<T>,
    pub frank: CopulaFit<T>,
    pub amh: CopulaFit<T>,
    /// Family used for the `Wy` column.
    pub selected: CopulaFamily,
}

impl<T: Real> WindowFit<T> {
    pub fn copula(&self, family: CopulaFamily) -> &CopulaFit<T> {
        match family {
            CopulaFamily::Frank => &self.frank,
            CopulaFamily::Amh => &self.amh,
        }
    }

    pub fn model(&self, family: CopulaFamily) -> HazardModel<T> {
        HazardModel::new(self.ri.model, self.gpd.model, self.copula(family).copula)
    }
}

fn fixed_copula_fit<T: Real>(ps: &PseudoSample<T>, copula: Copula<T>) -> Result<CopulaFit<T>, CopulaError> {
    let gof = goodness_of_fit(ps, &copula)?;
    Ok(CopulaFit {
        copula,
        loglik: copula.log_likelihood(ps),
        rmse: gof.rmse,
        aic: gof.aic,
        n: ps.len(),
        at_boundary: false,
        aic_guarded: gof.aic_guarded,
    })
}

/// Fits the recurrence-interval law, the size law and both copulas on the
/// extremes of `window` beyond `threshold`.
pub fn fit_window<T: Real>(
    window: &[T],
    threshold: T,
    spec: &ExtremeSpec<T>,
    cfg: &BacktestConfig<T>,
) -> Result<WindowFit<T>, BacktestError> {
    let short = |intervals| BacktestError::InsufficientEvents {
        label: spec.label(),
        end: window.len(),
        intervals,
        min: cfg.min_intervals,
    };
    let events = match extract_events(window, spec, threshold) {
        Ok(ev) => ev,
        Err(EventsError::TooFewEvents(k)) => return Err(short(k.saturating_sub(1))),
        Err(e) => return Err(e.into()),
    };
    let (tau, y) = events.paired(cfg.pairing);
    if tau.len() < cfg.min_intervals {
        return Err(short(tau.len()));
    }
    let ri = fit_ri(&tau, cfg.ri_family, &RiFitOptions { search: cfg.search, min_sample: cfg.min_intervals })?;
    let gpd = fit_gpd(events.y(), &GpdFitOptions { min_sample: cfg.min_intervals, ..GpdFitOptions::default() })?;
    let ps = PseudoSample::from_marginals(&tau, &y, &ri.model, &gpd.model)?;
    let (frank, amh) = match cfg.copula_theta {
        Some(theta) => (
            fixed_copula_fit(&ps, Copula::new(CopulaFamily::Frank, theta)?)?,
            fixed_copula_fit(&ps, Copula::new(CopulaFamily::Amh, theta)?)?,
        ),
        None => {
            let opts = CopulaFitOptions { search: cfg.search, min_sample: cfg.min_intervals };
            (fit_copula(&ps, CopulaFamily::Frank, &opts)?, fit_copula(&ps, CopulaFamily::Amh, &opts)?)
        }
    };
    let selected = match cfg.copula_choice {
        CopulaChoice::Frank => CopulaFamily::Frank,
        CopulaChoice::Amh => CopulaFamily::Amh,
        CopulaChoice::Auto => best_fit(&[frank, amh]).expect("two fits").family(),
    };
    Ok(WindowFit { end: window.len(), threshold, events: events.len(), ri, gpd, frank, amh, selected })
}

fn fit_at<T: Real>(
    r: &[T],
    end: usize,
    origin: usize,
    spec: &ExtremeSpec<T>,
    cfg: &BacktestConfig<T>,
) -> Result<WindowFit<T>, BacktestError> {
    let base = if cfg.fixed_threshold { &r[..origin] } else { &r[..end] };
    let threshold = spec.threshold(base)?;
    fit_window(&r[..end], threshold, spec, cfg)
}

/// Hazards for one day, computed from the days before it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DayForecast<T: Real> {
    /// Days since the last extreme, not counting the forecast day.
    pub t: usize,
    pub y_last: T,
    pub w: T,
    pub wy: T,
    pub wy_frank: T,
    pub wy_amh: T,
    /// End of the training window whose fit was used.
    pub fit_end: usize,
    pub w_warning: Option<HazardWarning>,
    pub wy_frank_warning: Option<HazardWarning>,
    pub wy_amh_warning: Option<HazardWarning>,
}

/// Forecast for day `history.len()` with a given fit; `None` before the
/// first extreme.
fn predict<T: Real>(
    history: &[T],
    fit: &WindowFit<T>,
    spec: &ExtremeSpec<T>,
    cfg: &BacktestConfig<T>,
) -> Result<Option<DayForecast<T>>, BacktestError> {
    let d = history.len();
    let Some(last) = history.iter().rposition(|&x| spec.is_extreme(x, fit.threshold)) else {
        return Ok(None);
    };
    let t = d - 1 - last;
    let y_last = spec.exceedance(history[last], fit.threshold);
    let q = HazardQuery::new(T::from_count(t), T::from_count(cfg.dt), y_last)?;
    let w = hazard_ri(&fit.ri.model, &q)?;
    let frank = hazard_joint(&fit.model(CopulaFamily::Frank), &q)?;
    let amh = hazard_joint(&fit.model(CopulaFamily::Amh), &q)?;
    let wy = match fit.selected {
        CopulaFamily::Frank => frank.value,
        CopulaFamily::Amh => amh.value,
    };
    Ok(Some(DayForecast {
        t,
        y_last,
        w: w.value,
        wy,
        wy_frank: frank.value,
        wy_amh: amh.value,
        fit_end: fit.end,
        w_warning: w.warning,
        wy_frank_warning: frank.warning,
        wy_amh_warning: amh.warning,
    }))
}

/// Out-of-sample forecast for day `history.len()` from `history` alone.
///
/// `origin` is the index of the first out-of-sample day. The fit is made on
/// the window ending at the refit day; if that fit fails, earlier refit days
/// are tried in turn, exactly as [`run_backtest`] carries fits forward.
pub fn forecast_day<T: Real>(
    history: &[T],
    origin: usize,
    spec: &ExtremeSpec<T>,
    cfg: &BacktestConfig<T>,
) -> Result<Option<DayForecast<T>>, BacktestError> {
    let d = history.len();
    if d < origin {
        return Err(BacktestError::BeforeOrigin { day: d, origin });
    }
    let mut end = cfg.refit_day(d, origin);
    loop {
        match fit_at(history, end, origin, spec, cfg) {
            Ok(fit) => return predict(history, &fit, spec, cfg),
            Err(e) if end < origin + cfg.refit_every => return Err(e),
            Err(_) => end -= cfg.refit_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sample {
    InSample,
    OutOfSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "W")]
    W,
    #[serde(rename = "Wy")]
    Wy,
    #[serde(rename = "Wy_frank")]
    WyFrank,
    #[serde(rename = "Wy_amh")]
    WyAmh,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::W, Variant::Wy, Variant::WyFrank, Variant::WyAmh];

    pub fn name(self) -> &'static str {
        match self {
            Variant::W => "W",
            Variant::Wy => "Wy",
            Variant::WyFrank => "Wy_frank",
            Variant::WyAmh => "Wy_amh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DayRecord<T: Real> {
    pub index: usize,
    pub date: NaiveDate,
    pub sample: Sample,
    #[serde(flatten)]
    pub forecast: DayForecast<T>,
    /// An extreme occurs within the forecast horizon.
    pub extreme: bool,
}

impl<T: Real> DayRecord<T> {
    pub fn hazard(&self, v: Variant) -> T {
        let f = &self.forecast;
        match v {
            Variant::W => f.w,
            Variant::Wy => f.wy,
            Variant::WyFrank => f.wy_frank,
            Variant::WyAmh => f.wy_amh,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// No alarm, no extreme.
    pub n00: usize,
    /// No alarm, extreme.
    pub n01: usize,
    /// Alarm, no extreme.
    pub n10: usize,
    /// Alarm, extreme.
    pub n11: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    /// A = n10 / (n00 + n10); NaN without non-extreme days.
    pub fn false_alarm_rate<T: Real>(&self) -> T {
        ratio(self.n10, self.n00 + self.n10)
    }

    /// D = n11 / (n01 + n11); NaN without extreme days.
    pub fn detection_rate<T: Real>(&self) -> T {
        ratio(self.n11, self.n01 + self.n11)
    }
}

fn ratio<T: Real>(num: usize, den: usize) -> T {
    if den == 0 {
        T::nan()
    } else {
        T::from_count(num) / T::from_count(den)
    }
}

/// Counts of alarms (hazard ≥ qp) against realized extremes.
pub fn confusion<T: Real>(hazard: &[T], truth: &[bool], qp: T) -> Result<ConfusionCounts, BacktestError> {
    if hazard.len() != truth.len() {
        return Err(BacktestError::LengthMismatch { hazard: hazard.len(), truth: truth.len() });
    }
    let mut c = ConfusionCounts::default();
    for (&h, &x) in hazard.iter().zip(truth) {
        match (h >= qp, x) {
            (false, false) => c.n00 += 1,
            (false, true) => c.n01 += 1,
            (true, false) => c.n10 += 1,
            (true, true) => c.n11 += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RocPoint<T: Real> {
    pub qp: T,
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "D")]
    pub d: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RocCurve<T: Real> {
    /// Sorted by A, then D.
    pub points: Vec<RocPoint<T>>,
    pub auc_m: T,
}

fn cmp_nan_last<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

/// Sorts the points and integrates D over A ∈ [0, 0.3] by trapezoids.
///
/// D at A = 0 is taken from the leftmost point; D at A = 0.3 is linearly
/// interpolated, or the last D is held when no point reaches 0.3. Any NaN
/// coordinate makes AUCₘ NaN.
pub fn roc<T: Real>(mut points: Vec<RocPoint<T>>) -> Result<RocCurve<T>, BacktestError> {
    if points.len() < 2 {
        return Err(BacktestError::TooFewPoints(points.len()));
    }
    points.sort_by(|p, q| {
        cmp_nan_last(p.a, q.a).then_with(|| cmp_nan_last(p.d, q.d)).then_with(|| cmp_nan_last(q.qp, p.qp))
    });
    let auc_m = auc_m(&points);
    Ok(RocCurve { points, auc_m })
}

fn auc_m<T: Real>(sorted: &[RocPoint<T>]) -> T {
    if sorted.iter().any(|p| p.a.is_nan() || p.d.is_nan()) {
        return T::nan();
    }
    let limit = T::lit(AUC_LIMIT);
    let mut area = T::zero();
    let (mut pa, mut pd) = (T::zero(), sorted[0].d);
    for p in sorted {
        if p.a > limit {
            let d_lim = if p.a > pa { pd + (p.d - pd) * (limit - pa) / (p.a - pa) } else { p.d };
            return area + (limit - pa) * (pd + d_lim) * T::half();
        }
        area = area + (p.a - pa) * (pd + p.d) * T::half();
        pa = p.a;
        pd = p.d;
    }
    area + (limit - pa) * pd
}

/// 201 evenly spaced values in [0, 1] merged with the distinct hazards.
pub fn default_qp_grid<T: Real>(hazards: &[T]) -> Vec<T> {
    let steps = DEFAULT_QP_POINTS - 1;
    let mut grid: Vec<T> = (0..=steps).map(|k| T::from_count(k) / T::from_count(steps)).collect();
    grid.extend(hazards.iter().copied().filter(|h| h.is_finite()));
    grid.sort_by(|a, b| cmp_nan_last(*a, *b));
    grid.dedup();
    grid
}

/// ROC of `hazard` against `truth` over `grid` (or the default sweep).
pub fn roc_curve<T: Real>(hazard: &[T], truth: &[bool], grid: Option<&[T]>) -> Result<RocCurve<T>, BacktestError> {
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = default_qp_grid(hazard);
            &owned
        }
    };
    let points = grid
        .iter()
        .map(|&qp| {
            let c = confusion(hazard, truth, qp)?;
            Ok(RocPoint { qp, a: c.false_alarm_rate(), d: c.detection_rate() })
        })
        .collect::<Result<Vec<_>, BacktestError>>()?;
    roc(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct VariantRoc<T: Real> {
    pub variant: Variant,
    pub sample: Sample,
    pub curve: RocCurve<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct AucRow<T: Real> {
    pub label: String,
    pub variant: Variant,
    pub in_sample: T,
    pub out_of_sample: T,
}

/// Backtest of one extreme definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SpecReport<T: Real> {
    pub label: String,
    pub spec: ExtremeSpec<T>,
    pub days: Vec<DayRecord<T>>,
    pub roc: Vec<VariantRoc<T>>,
    /// Successful fits, one per refit day (the first is the in-sample fit).
    pub fits: Vec<WindowFit<T>>,
    pub warnings: Vec<String>,
}

impl<T: Real> SpecReport<T> {
    pub fn curve(&self, variant: Variant, sample: Sample) -> Option<&RocCurve<T>> {
        self.roc.iter().find(|r| r.variant == variant && r.sample == sample).map(|r| &r.curve)
    }

    pub fn auc_m(&self, variant: Variant, sample: Sample) -> T {
        self.curve(variant, sample).map_or(T::nan(), |c| c.auc_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BacktestReport<T: Real> {
    pub config: BacktestConfig<T>,
    pub days: usize,
    pub split_index: usize,
    pub split_date: Option<NaiveDate>,
    pub results: Vec<SpecReport<T>>,
    pub warnings: Vec<String>,
}

impl<T: Real> BacktestReport<T> {
    /// AUCₘ per extreme definition and hazard variant.
    pub fn auc_table(&self) -> Vec<AucRow<T>> {
        self.results
            .iter()
            .flat_map(|s| {
                Variant::ALL.into_iter().map(move |variant| AucRow {
                    label: s.label.clone(),
                    variant,
                    in_sample: s.auc_m(variant, Sample::InSample),
                    out_of_sample: s.auc_m(variant, Sample::OutOfSample),
                })
            })
            .collect()
    }
}

fn truth_at<T: Real>(r: &[T], d: usize, dt: usize, threshold: T, spec: &ExtremeSpec<T>) -> bool {
    r[d..(d + dt).min(r.len())].iter().any(|&x| spec.is_extreme(x, threshold))
}

#[derive(Default)]
struct WarningTally(BTreeMap<String, usize>);

impl WarningTally {
    fn add(&mut self, msg: String) {
        *self.0.entry(msg).or_default() += 1;
    }

    fn into_messages(self, unit: &str) -> Vec<String> {
        self.0
            .into_iter()
            .map(|(m, k)| if k == 1 { m } else { format!("{m} ({k} {unit})") })
            .collect()
    }
}

/// Runs the expanding-window backtest for every extreme definition in `cfg`.
pub fn run_backtest<T: Real>(series: &ReturnSeries<T>, cfg: &BacktestConfig<T>) -> Result<BacktestReport<T>, BacktestError> {
    cfg.validate()?;
    let r = series.returns();
    let n = r.len();
    let origin = cfg.split_index(n);
    if origin < 2 || origin >= n {
        return Err(BacktestError::InvalidConfig(format!("split leaves {origin} training days out of {n}")));
    }
    let results = cfg
        .quantiles
        .iter()
        .map(|spec| run_spec(series, origin, spec, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let warnings = results.iter().flat_map(|s| s.warnings.iter().cloned()).collect();
    Ok(BacktestReport {
        config: cfg.clone(),
        days: n,
        split_index: origin,
        split_date: series.dates().get(origin).copied(),
        results,
        warnings,
    })
}

fn run_spec<T: Real>(
    series: &ReturnSeries<T>,
    origin: usize,
    spec: &ExtremeSpec<T>,
    cfg: &BacktestConfig<T>,
) -> Result<SpecReport<T>, BacktestError> {
    let r = series.returns();
    let dates = series.dates();
    let n = r.len();
    let label = spec.label();
    let mut warnings = Vec::new();

    let ends: Vec<usize> = (origin..n).step_by(cfg.refit_every).collect();
    let outcomes: Vec<Result<WindowFit<T>, BacktestError>> =
        ends.par_iter().map(|&end| fit_at(r, end, origin, spec, cfg)).collect();

    // carry the last successful fit over failed windows
    let mut fits: Vec<WindowFit<T>> = Vec::new();
    let mut active: Vec<usize> = Vec::with_capacity(ends.len());
    for (end, outcome) in ends.iter().zip(outcomes) {
        match outcome {
            Ok(fit) => {
                fits.push(fit);
            }
            Err(e) if fits.is_empty() => return Err(e),
            Err(e) => {
                let from = fits.last().expect("non-empty").end;
                let msg = format!("{label}: fit on days before {end} failed ({e}); carried forward fit ending at {from}");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        active.push(fits.len() - 1);
    }
    let in_sample_fit = &fits[0];

    let mut days: Vec<DayRecord<T>> = Vec::with_capacity(n);
    let in_sample = (1..origin)
        .into_par_iter()
        .map(|d| predict(&r[..d], in_sample_fit, spec, cfg).map(|p| (d, p, in_sample_fit.threshold, Sample::InSample)))
        .collect::<Result<Vec<_>, _>>()?;
    let out_of_sample = (origin..n)
        .into_par_iter()
        .map(|d| {
            let fit = &fits[active[(d - origin) / cfg.refit_every]];
            predict(&r[..d], fit, spec, cfg).map(|p| (d, p, fit.threshold, Sample::OutOfSample))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (d, p, threshold, sample) in in_sample.into_iter().chain(out_of_sample) {
        if let Some(forecast) = p {
            days.push(DayRecord {
                index: d,
                date: dates[d],
                sample,
                forecast,
                extreme: truth_at(r, d, cfg.dt, threshold, spec),
            });
        }
    }

    let mut tally = WarningTally::default();
    for rec in &days {
        let f = &rec.forecast;
        for (name, w) in [("W", f.w_warning), ("Wy_frank", f.wy_frank_warning), ("Wy_amh", f.wy_amh_warning)] {
            if let Some(w) = w {
                tally.add(format!("{label}: {name}: {}", w.message()));
            }
        }
    }
    for fit in &fits {
        for c in [&fit.frank, &fit.amh] {
            if c.at_boundary {
                tally.add(format!("{label}: {} theta on the search boundary", c.family()));
            }
            if c.aic_guarded {
                tally.add(format!("{label}: {} AIC guarded against a zero squared error", c.family()));
            }
        }
        if fit.ri.at_boundary {
            tally.add(format!("{label}: {} shape on the search boundary", fit.ri.model.family()));
        }
    }

    let mut roc_list = Vec::new();
    for sample in [Sample::InSample, Sample::OutOfSample] {
        let sel: Vec<&DayRecord<T>> = days.iter().filter(|d| d.sample == sample).collect();
        let truth: Vec<bool> = sel.iter().map(|d| d.extreme).collect();
        if sel.is_empty() {
            tally.add(format!("{label}: no {} days to evaluate", sample_name(sample)));
            continue;
        }
        if !truth.iter().any(|&x| x) {
            tally.add(format!("{label}: no {} extremes, D undefined and reported as NaN", sample_name(sample)));
        }
        if truth.iter().all(|&x| x) {
            tally.add(format!("{label}: every {} day is extreme, A undefined and reported as NaN", sample_name(sample)));
        }
        for variant in Variant::ALL {
            let hazard: Vec<T> = sel.iter().map(|d| d.hazard(variant)).collect();
            let curve = roc_curve(&hazard, &truth, cfg.qp_grid.as_deref())?;
            roc_list.push(VariantRoc { variant, sample, curve });
        }
    }
    let tallied = tally.into_messages("occurrences");
    for m in &tallied {
        log::warn!("{m}");
    }
    warnings.extend(tallied);

    Ok(SpecReport { label, spec: *spec, days, roc: roc_list, fits, warnings })
}

fn sample_name(s: Sample) -> &'static str {
    match s {
        Sample::InSample => "in-sample",
        Sample::OutOfSample => "out-of-sample",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(a: f64, d: f64) -> RocPoint<f64> {
        RocPoint { qp: 0.0, a, d }
    }

    #[test]
    fn confusion_extremes() {
        let h = [0.1, 0.5, 0.9, 0.3];
        let x = [false, true, true, false];
        let all = confusion(&h, &x, 0.0).unwrap();
        assert_eq!((all.false_alarm_rate::<f64>(), all.detection_rate::<f64>()), (1.0, 1.0));
        let none = confusion(&h, &x, 1.0 + 1e-12).unwrap();
        assert_eq!((none.false_alarm_rate::<f64>(), none.detection_rate::<f64>()), (0.0, 0.0));
        assert_eq!(none.total(), 4);
        let perfect: Vec<f64> = x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let c = confusion(&perfect, &x, 0.5).unwrap();
        assert_eq!((c.false_alarm_rate::<f64>(), c.detection_rate::<f64>()), (0.0, 1.0));
        assert!(confusion(&h, &x[..2], 0.5).is_err());
    }

    #[test]
    fn undefined_rates_are_nan() {
        let c = confusion(&[0.2, 0.4], &[false, false], 0.3).unwrap();
        assert!(c.detection_rate::<f64>().is_nan());
        assert_eq!(c.false_alarm_rate::<f64>(), 0.5);
    }

    #[test]
    fn auc_of_reference_predictors() {
        let perfect = roc(vec![pt(0.0, 1.0), pt(1.0, 1.0), pt(0.0, 1.0)]).unwrap();
        assert_eq!(perfect.auc_m, 0.3);
        let random = roc(vec![pt(1.0, 1.0), pt(0.0, 0.0)]).unwrap();
        assert!((random.auc_m - 0.045).abs() < 1e-15);
        assert!(roc(vec![pt(0.0, 0.0)]).is_err());
    }

    #[test]
    fn auc_conventions() {
        // D(0) from the leftmost point, held constant when A never reaches 0.3
        let c = roc(vec![pt(0.1, 0.4), pt(0.2, 0.6)]).unwrap();
        let expected = 0.1 * 0.4 + 0.1 * 0.5 + 0.1 * 0.6;
        assert!((c.auc_m - expected).abs() < 1e-15);
        // interpolation at 0.3
        let c = roc(vec![pt(0.0, 0.2), pt(0.5, 0.7)]).unwrap();
        assert!((c.auc_m - 0.3 * (0.2 + 0.5) / 2.0).abs() < 1e-15);
        let c = roc(vec![pt(0.1, f64::NAN), pt(0.5, 0.7)]).unwrap();
        assert!(c.auc_m.is_nan());
    }

    #[test]
    fn constant_predictor_is_random() {
        let x: Vec<bool> = (0..1000).map(|i| i % 7 == 0).collect();
        let h = vec![0.37_f64; x.len()];
        let c = roc_curve(&h, &x, None).unwrap();
        assert!((c.auc_m - 0.045).abs() < 0.005);
    }

    #[test]
    fn roc_is_monotone_in_qp() {
        let x: Vec<bool> = (0..300).map(|i| (i * 37) % 11 < 3).collect();
        let h: Vec<f64> = (0..300).map(|i| ((i * 53) % 97) as f64 / 97.0).collect();
        let grid = default_qp_grid(&h);
        let mut prev = (0.0, 0.0);
        for &qp in grid.iter().rev() {
            let c = confusion(&h, &x, qp).unwrap();
            let cur = (c.false_alarm_rate::<f64>(), c.detection_rate::<f64>());
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1);
            prev = cur;
        }
    }

    #[test]
    fn default_grid_contents() {
        let g = default_qp_grid(&[0.123, 0.5, 0.123]);
        assert_eq!(g.len(), 202);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn refit_schedule() {
        let cfg = BacktestConfig::<f64> { refit_every: 5, ..Default::default() };
        assert_eq!(cfg.refit_day(100, 100), 100);
        assert_eq!(cfg.refit_day(104, 100), 100);
        assert_eq!(cfg.refit_day(105, 100), 105);
        assert_eq!(cfg.split_index(1000), 700);
    }

    #[test]
    fn config_validation() {
        let ok = BacktestConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        let bad = [
            BacktestConfig { split: 1.0, ..ok.clone() },
            BacktestConfig { dt: 0, ..ok.clone() },
            BacktestConfig { refit_every: 0, ..ok.clone() },
            BacktestConfig { quantiles: vec![], ..ok.clone() },
            BacktestConfig { qp_grid: Some(vec![0.0, 0.5]), ..ok.clone() },
            BacktestConfig { qp_grid: Some(vec![0.0, 0.7, 0.5, 1.0]), ..ok.clone() },
            BacktestConfig { copula_theta: Some(1.5), ..ok.clone() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn config_json_defaults_and_round_trip() {
        let cfg: BacktestConfig<f64> = serde_json::from_str(r#"{"refit_every": 5}"#).unwrap();
        assert_eq!(cfg.refit_every, 5);
        assert_eq!(cfg.split, 0.7);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<BacktestConfig<f64>>(&text).unwrap(), cfg);
        assert!(serde_json::from_str::<BacktestConfig<f64>>(r#"{"splitt": 0.5}"#).is_err());
    }

    fn synthetic_series(n: usize, seed: u64) -> ReturnSeries<f64> {
        use crate::marginals::{GpdModel, RiModel};
        use crate::synth::{embed_in_returns, sample_event_process, GeneratorSpec};
        let spec = GeneratorSpec {
            ri: RiModel::new(RiFamily::QExponential, 1.2, 8.0).unwrap(),
            gpd: GpdModel::new(0.1, 0.01).unwrap(),
            copula: Copula::new(CopulaFamily::Frank, -2.0).unwrap(),
            n,
            seed,
            pairing: Pairing::End,
        };
        let ev = sample_event_process(&spec).unwrap();
        let len = ev.indices().last().unwrap() + 5;
        ReturnSeries::with_synthetic_dates(embed_in_returns(&ev, len, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn run_matches_standalone_forecasts() {
        let series = synthetic_series(150, 3);
        let cfg = BacktestConfig {
            quantiles: vec![ExtremeSpec::new(0.8, Side::Positive).unwrap()],
            refit_every: 60,
            ..Default::default()
        };
        let report = run_backtest(&series, &cfg).unwrap();
        let spec = &report.results[0];
        let origin = report.split_index;
        let r = series.returns();
        let oos: Vec<_> = spec.days.iter().filter(|d| d.sample == Sample::OutOfSample).collect();
        assert!(!oos.is_empty());
        for rec in oos.iter().step_by(37) {
            let f = forecast_day(&r[..rec.index], origin, &spec.spec, &cfg).unwrap().unwrap();
            assert_eq!(f, rec.forecast);
        }
        assert!(forecast_day(&r[..origin - 1], origin, &spec.spec, &cfg).is_err());
        for rec in &spec.days {
            let f = &rec.forecast;
            for h in [f.w, f.wy, f.wy_frank, f.wy_amh] {
                assert!((0.0..=1.0).contains(&h));
            }
        }
    }

    #[test]
    fn too_few_events_is_an_error() {
        let mut r = vec![0.0_f64; 500];
        r[10] = 1.0;
        r[40] = 2.0;
        let series = ReturnSeries::with_synthetic_dates(r).unwrap();
        let err = run_backtest(&series, &BacktestConfig::default()).unwrap_err();
        assert!(matches!(err, BacktestError::InsufficientEvents { .. }), "{err}");
    }

    #[test]
    fn periodic_extremes_raise_hazard_near_the_period() {
        let mut r = vec![0.0_f64; 3000];
        let (mut i, mut k) = (5, 0);
        while i < r.len() {
            r[i] = 0.01 + 0.001 * (k % 7) as f64;
            i += [10, 9, 11, 10][k % 4];
            k += 1;
        }
        let series = ReturnSeries::with_synthetic_dates(r).unwrap();
        let cfg = BacktestConfig {
            quantiles: vec![ExtremeSpec::new(0.85, Side::Positive).unwrap()],
            refit_every: 500,
            ..Default::default()
        };
        let report = run_backtest(&series, &cfg).unwrap();
        let model = report.results[0].fits[0].ri.model;
        assert!((model.tau_mean() - 10.0).abs() < 1e-9);
        let w = |t: f64| hazard_ri(&model, &HazardQuery::new(t, 1.0, 0.0).unwrap()).unwrap().value;
        assert!(w(9.0) > w(1.0), "{} {}", w(9.0), w(1.0));
    }
}
