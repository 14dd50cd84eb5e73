//! Hazard probability that the next extreme arrives within Δt days, given
//! that the last one happened t days ago: from the recurrence-interval law
//! alone (W) and corrected by the size of the last extreme through the
//! copula (W_y).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copula::{Copula, CopulaError};
use crate::marginals::{GpdModel, MarginalError, RiModel};
use crate::scalar::{clamp, Real};

/// Survival mass below which an event is treated as overdue.
pub const SURVIVAL_FLOOR: f64 = 1e-12;
/// G(y_last) below which the size correction is dropped.
pub const SIZE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HazardError {
    #[error("invalid hazard query: t = {t}, dt = {dt}, y_last = {y_last}")]
    InvalidQuery { t: f64, dt: f64, y_last: f64 },
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    Copula(#[from] CopulaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardWarning {
    /// Survival beyond t is below [`SURVIVAL_FLOOR`]; the hazard is set to 1.
    SurvivalExhausted,
    /// G(y_last) is below [`SIZE_FLOOR`]; W_y falls back to W.
    SizeDegenerate,
}

impl HazardWarning {
    pub fn message(self) -> &'static str {
        match self {
            HazardWarning::SurvivalExhausted => "survival probability exhausted, hazard set to 1",
            HazardWarning::SizeDegenerate => "last exceeding size has zero probability mass, W_y replaced by W",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct HazardQuery<T: Real> {
    /// Days since the last extreme.
    pub t: T,
    /// Forecast horizon in days.
    pub dt: T,
    /// Exceeding size of the last extreme.
    pub y_last: T,
}

impl<T: Real> HazardQuery<T> {
    pub fn new(t: T, dt: T, y_last: T) -> Result<Self, HazardError> {
        let ok = t >= T::zero() && t.is_finite() && dt > T::zero() && y_last >= T::zero() && !y_last.is_nan();
        if !ok {
            return Err(HazardError::InvalidQuery {
                t: t.to_f64_lossless(),
                dt: dt.to_f64_lossless(),
                y_last: y_last.to_f64_lossless(),
            });
        }
        Ok(Self { t, dt, y_last })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hazard<T> {
    pub value: T,
    pub warning: Option<HazardWarning>,
}

impl<T> Hazard<T> {
    fn plain(value: T) -> Self {
        Self { value, warning: None }
    }
}

/// W(Δt|t) = [P(t+Δt) − P(t)] / [1 − P(t)].
pub fn hazard_ri<T: Real>(ri: &RiModel<T>, q: &HazardQuery<T>) -> Result<Hazard<T>, HazardError> {
    let s1 = ri.sf(q.t)?;
    if s1 < T::lit(SURVIVAL_FLOOR) {
        return Ok(Hazard { value: T::one(), warning: Some(HazardWarning::SurvivalExhausted) });
    }
    let s2 = ri.sf(q.t + q.dt)?;
    Ok(Hazard::plain(clamp((s1 - s2) / s1, T::zero(), T::one())))
}

/// The joint law of (τ, y): recurrence-interval marginal, size marginal and
/// the copula coupling them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct HazardModel<T: Real> {
    pub ri: RiModel<T>,
    pub gpd: GpdModel<T>,
    pub copula: Copula<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardPair<T> {
    pub w: Hazard<T>,
    pub wy: Hazard<T>,
}

impl<T: Real> HazardModel<T> {
    pub fn new(ri: RiModel<T>, gpd: GpdModel<T>, copula: Copula<T>) -> Self {
        Self { ri, gpd, copula }
    }

    /// G(y) with sizes past a bounded support mapped to 1.
    pub fn size_probability(&self, y: T) -> Result<T, HazardError> {
        if y >= self.gpd.support_end() {
            return Ok(T::one());
        }
        Ok(self.gpd.cdf(y)?)
    }

    pub fn hazard_ri(&self, q: &HazardQuery<T>) -> Result<Hazard<T>, HazardError> {
        hazard_ri(&self.ri, q)
    }

    pub fn hazard_joint(&self, q: &HazardQuery<T>) -> Result<Hazard<T>, HazardError> {
        hazard_joint(self, q)
    }

    pub fn evaluate(&self, q: &HazardQuery<T>) -> Result<HazardPair<T>, HazardError> {
        Ok(HazardPair { w: self.hazard_ri(q)?, wy: self.hazard_joint(q)? })
    }
}

/// W_y(Δt|t) = [C(u₂, v) − C(u₁, v)] / [v − C(u₁, v)] with u₁ = P(t),
/// u₂ = P(t+Δt) and v = G(y_last).
///
/// Evaluated as [R(s₁) − R(s₂)] / R(s₁) with sᵢ = 1 − uᵢ and
/// R(s) = v − C(1 − s, v), which is the same quantity without the
/// cancellation of the literal form when P(t) is close to 1.
pub fn hazard_joint<T: Real>(m: &HazardModel<T>, q: &HazardQuery<T>) -> Result<Hazard<T>, HazardError> {
    let v = m.size_probability(q.y_last)?;
    if v < T::lit(SIZE_FLOOR) {
        let w = hazard_ri(&m.ri, q)?;
        return Ok(Hazard { value: w.value, warning: w.warning.or(Some(HazardWarning::SizeDegenerate)) });
    }
    let s1 = m.ri.sf(q.t)?;
    let exhausted = Hazard { value: T::one(), warning: Some(HazardWarning::SurvivalExhausted) };
    if s1 < T::lit(SURVIVAL_FLOOR) {
        return Ok(exhausted);
    }
    let s2 = m.ri.sf(q.t + q.dt)?;
    let r1 = m.copula.upper_u_mass(s1, v)?;
    if !(r1 > T::zero()) {
        return Ok(exhausted);
    }
    let r2 = m.copula.upper_u_mass(s2, v)?;
    Ok(Hazard::plain(clamp((r1 - r2) / r1, T::zero(), T::one())))
}
