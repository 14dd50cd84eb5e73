//! Forecasting financial extremes from the joint law of recurrence intervals
//! and exceeding sizes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod copula;
pub mod events;
pub mod hazard;
pub mod ingest;
pub mod marginals;
pub mod optim;
pub mod quad;
pub mod scalar;
pub mod special;
pub mod synth;

pub use scalar::Real;

use thiserror::Error;

/// Any failure of the library, tagged with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Events(#[from] events::EventsError),
    #[error(transparent)]
    Marginal(#[from] marginals::MarginalError),
    #[error(transparent)]
    Copula(#[from] copula::CopulaError),
    #[error(transparent)]
    Hazard(#[from] hazard::HazardError),
    #[error(transparent)]
    Backtest(#[from] backtest::BacktestError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Ingest(_) => "ingest",
            Error::Events(_) => "events",
            Error::Marginal(_) => "marginals",
            Error::Copula(_) => "copula",
            Error::Hazard(_) => "hazard",
            Error::Backtest(_) => "backtest",
            Error::Synth(_) => "synth",
        }
    }
}

pub type ReturnSeries = ingest::ReturnSeries<f64>;
pub type ExtremeSpec = events::ExtremeSpec<f64>;
pub type EventSeries = events::EventSeries<f64>;
pub type RiModel = marginals::RiModel<f64>;
pub type GpdModel = marginals::GpdModel<f64>;
pub type Copula = copula::Copula<f64>;
pub type HazardModel = hazard::HazardModel<f64>;
pub type BacktestConfig = backtest::BacktestConfig<f64>;
pub type BacktestReport = backtest::BacktestReport<f64>;
pub type GeneratorSpec = synth::GeneratorSpec<f64>;

pub type ReturnSeriesF32 = ingest::ReturnSeries<f32>;
pub type RiModelF32 = marginals::RiModel<f32>;
pub type GpdModelF32 = marginals::GpdModel<f32>;
pub type CopulaF32 = copula::Copula<f32>;
pub type HazardModelF32 = hazard::HazardModel<f32>;
