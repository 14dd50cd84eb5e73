//! `tailhazard`: extract extremes, fit the joint interval/size model,
//! evaluate hazards, backtest forecasts and simulate event streams.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use serde::Serialize;
use tailhazard::backtest::CopulaChoice;
use tailhazard::copula::CopulaFamily;
use tailhazard::events::{Pairing, Side};
use tailhazard::marginals::RiFamily;

use crate::commands::{BacktestOverrides, ExtractArgs, FitArgs, HazardArgs, SimulateArgs};
use crate::config::InputFormat;

#[derive(Parser)]
#[command(name = "tailhazard", version, about = "Hazard forecasts of extreme returns", arg_required_else_help = true)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "TAILHAZARD_THREADS")]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the extremes of a series as `index,tau,y` CSV.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "return")]
        format: InputFormat,
        #[arg(long)]
        quantile: f64,
        #[arg(long, default_value = "positive")]
        side: Side,
        /// Event CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write descriptive statistics of tau and y as JSON.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Fit interval laws, the size law and both copulas; print JSON.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "return")]
        format: InputFormat,
        #[arg(long)]
        quantile: f64,
        #[arg(long, default_value = "positive")]
        side: Side,
        #[arg(long, default_value = "end")]
        pairing: Pairing,
        /// Interval law used for the copula pseudo-observations.
        #[arg(long, default_value = "q_exponential")]
        ri_family: RiFamily,
        /// Exhaustive 1e-6 grid instead of golden-section search.
        #[arg(long)]
        exact_grid: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate W and Wy for one query; print JSON.
    #[command(allow_negative_numbers = true)]
    Hazard {
        /// JSON written by `fit`.
        #[arg(long, conflicts_with = "model")]
        fit: Option<PathBuf>,
        /// JSON with `ri`, `gpd` and `copula` parameters.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Copula taken from the fit (default: the selected one).
        #[arg(long)]
        copula: Option<CopulaFamily>,
        /// Days since the last extreme.
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        /// Exceeding size of the last extreme.
        #[arg(long)]
        y_last: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expanding-window forecast evaluation; writes report.json, hazard.csv
    /// and roc.csv into the output directory.
    Backtest {
        /// RunConfig JSON; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<InputFormat>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Extreme quantile level; repeat for several definitions.
        #[arg(long)]
        quantile: Vec<f64>,
        /// Side for each --quantile, or one side for all.
        #[arg(long)]
        side: Vec<Side>,
        #[arg(long)]
        split: Option<f64>,
        #[arg(long)]
        dt: Option<usize>,
        #[arg(long)]
        refit_every: Option<usize>,
        #[arg(long)]
        copula: Option<CopulaChoice>,
        #[arg(long)]
        ri_family: Option<RiFamily>,
        #[arg(long)]
        pairing: Option<Pairing>,
        /// Keep the threshold of the initial training window.
        #[arg(long)]
        fixed_threshold: bool,
        #[arg(long)]
        exact_grid: bool,
        #[arg(long)]
        min_intervals: Option<usize>,
        /// Fix θ of both copulas instead of fitting it.
        #[arg(long, allow_hyphen_values = true)]
        copula_theta: Option<f64>,
    },
    /// Sample the joint event process from a generator spec JSON.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Event CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a `date,value` return series with the events embedded.
        #[arg(long)]
        returns: Option<PathBuf>,
        /// Length of the return series (default: through the last event).
        #[arg(long, requires = "returns")]
        days: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    module: &'a str,
    message: String,
    context: Vec<String>,
}

fn error_report(err: &anyhow::Error) -> String {
    let lib = err.chain().find_map(|e| e.downcast_ref::<tailhazard::Error>());
    let module = lib.map_or("cli", |e| e.module());
    let message = lib.map_or_else(|| err.root_cause().to_string(), |e| e.to_string());
    let context = err.chain().map(|e| e.to_string()).take_while(|m| *m != message).collect();
    let report = ErrorReport { error: ErrorBody { module, message, context } };
    serde_json::to_string(&report).expect("error report serializes")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    pool.build_global()?;
    match cli.command {
        Command::Extract { input, format, quantile, side, out, stats } => {
            commands::extract(ExtractArgs { input, format, quantile, side, out, stats })
        }
        Command::Fit { input, format, quantile, side, pairing, ri_family, exact_grid, out } => {
            commands::fit(FitArgs { input, format, quantile, side, pairing, ri_family, exact_grid, out })
        }
        Command::Hazard { fit, model, copula, t, dt, y_last, out } => {
            commands::hazard(HazardArgs { fit, model, copula, t, dt, y_last, out })
        }
        Command::Backtest {
            config,
            input,
            format,
            out_dir,
            quantile,
            side,
            split,
            dt,
            refit_every,
            copula,
            ri_family,
            pairing,
            fixed_threshold,
            exact_grid,
            min_intervals,
            copula_theta,
        } => commands::backtest(
            config,
            BacktestOverrides {
                input,
                format,
                out_dir,
                quantiles: quantile,
                sides: side,
                split,
                dt,
                refit_every,
                copula,
                ri_family,
                pairing,
                fixed_threshold,
                exact_grid,
                min_intervals,
                copula_theta,
            },
        ),
        Command::Simulate { spec, out, returns, days, seed, n } => {
            commands::simulate(SimulateArgs { spec, out, returns, days, seed, n })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2));
        }
    };
    let mut verbosity = cli.verbose;
    if let Command::Backtest { config: Some(path), .. } = &cli.command {
        if verbosity == 0 {
            verbosity = config::RunConfig::load(path).map_or(0, |c| c.verbosity);
        }
    }
    let level = match verbosity {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_report(&e));
            ExitCode::from(1)
        }
    }
}
