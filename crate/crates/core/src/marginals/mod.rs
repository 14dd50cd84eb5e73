//! Marginal laws: recurrence-interval distributions (stretched exponential,
//! q-exponential, Weibull) and the generalized Pareto distribution of
//! exceeding sizes.

mod gpd;
mod ri;

use thiserror::Error;

pub use gpd::{fit_gpd, GpdFit, GpdFitOptions, GpdModel};
pub use ri::{fit_all_ri, fit_ri, RiFamily, RiFit, RiFitOptions, RiModel};

/// Shape or tail parameters closer than this to a singular point are evaluated
/// through the exponential limit.
pub const SINGULAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MarginalError {
    #[error("invalid {family} parameters: {reason}")]
    InvalidParameters { family: &'static str, reason: String },
    #[error("argument {value} outside the support")]
    OutsideSupport { value: f64 },
    #[error("sample too small: {len} observations, need at least {min}")]
    SampleTooSmall { len: usize, min: usize },
    #[error("degenerate sample: all {0} observations are equal")]
    DegenerateSample(usize),
    #[error("sample contains an invalid observation at position {index}: {value}")]
    InvalidObservation { index: usize, value: f64 },
    #[error(
        "GPD optimizer did not converge after {iterations} iterations \
         (best xi={xi}, phi={phi}, lnL={loglik})"
    )]
    NonConvergence { iterations: usize, xi: f64, phi: f64, loglik: f64 },
}
