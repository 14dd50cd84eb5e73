//! Seeded samplers for the marginal laws, the copulas and the joint event
//! process. Every sampler draws from its own ChaCha20 stream seeded with the
//! given integer, so results are reproducible across platforms.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copula::{Copula, CopulaError};
use crate::events::{EventSeries, EventsError, Pairing};
use crate::marginals::{GpdModel, MarginalError, RiModel};
use crate::scalar::Real;

/// Name of the generator, recorded in reports.
pub const PRNG_NAME: &str = "ChaCha20";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error(transparent)]
    Events(#[from] EventsError),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

fn stream(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn uniform<T: Real>(rng: &mut ChaCha20Rng) -> T {
    T::lit(rng.sample::<f64, _>(Open01))
}

/// Recurrence intervals by inversion of the closed-form CDF.
pub fn sample_ri<T: Real>(model: &RiModel<T>, n: usize, seed: u64) -> Result<Vec<T>, SynthError> {
    let mut rng = stream(seed);
    (0..n).map(|_| Ok(model.quantile(uniform(&mut rng))?)).collect()
}

/// Exceeding sizes y = φ((1−U)^{−ξ} − 1)/ξ.
pub fn sample_gpd<T: Real>(model: &GpdModel<T>, n: usize, seed: u64) -> Result<Vec<T>, SynthError> {
    let mut rng = stream(seed);
    (0..n).map(|_| Ok(model.quantile(uniform(&mut rng))?)).collect()
}

fn copula_pair<T: Real>(copula: &Copula<T>, rng: &mut ChaCha20Rng) -> Result<(T, T), SynthError> {
    let u = uniform(rng);
    let w = uniform(rng);
    Ok((u, copula.inverse_conditional(u, w)?))
}

/// Pairs (u, v): u uniform, v from the conditional law ∂C/∂u inverted by
/// bisection.
pub fn sample_copula<T: Real>(copula: &Copula<T>, n: usize, seed: u64) -> Result<Vec<(T, T)>, SynthError> {
    let mut rng = stream(seed);
    (0..n).map(|_| copula_pair(copula, &mut rng)).collect()
}

/// Parameters of the joint (τ, y) process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GeneratorSpec<T: Real> {
    pub ri: RiModel<T>,
    pub gpd: GpdModel<T>,
    pub copula: Copula<T>,
    /// Number of coupled (τ, y) pairs; the series has `n + 1` events.
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub pairing: Pairing,
}

fn day_count<T: Real>(tau: T) -> Result<usize, SynthError> {
    tau.ceil()
        .max(T::one())
        .to_usize()
        .ok_or_else(|| SynthError::InvalidSpec(format!("recurrence interval {tau} is not representable")))
}

/// Extremes whose recurrence intervals and sizes follow the coupled model.
///
/// Each pair (τ, y) comes from the copula followed by the inverse marginal
/// CDFs; τ is rounded up to whole days. Under [`Pairing::End`] the size of
/// event k+1 is coupled with the interval leading to it, under
/// [`Pairing::Start`] the size of event k is coupled with the interval that
/// follows it. The unpaired size and the offset of the first event are drawn
/// from the marginals independently. The threshold is 0.
pub fn sample_event_process<T: Real>(spec: &GeneratorSpec<T>) -> Result<EventSeries<T>, SynthError> {
    if spec.n == 0 {
        return Err(SynthError::InvalidSpec("n must be at least 1".into()));
    }
    let mut rng = stream(spec.seed);
    let first = day_count(spec.ri.quantile(uniform(&mut rng))?)? - 1;
    let loose_size = spec.gpd.quantile(uniform(&mut rng))?;

    let mut indices = Vec::with_capacity(spec.n + 1);
    let mut sizes = Vec::with_capacity(spec.n + 1);
    indices.push(first);
    if spec.pairing == Pairing::End {
        sizes.push(loose_size);
    }
    let mut at = first;
    for _ in 0..spec.n {
        let (u, v) = copula_pair(&spec.copula, &mut rng)?;
        at = at
            .checked_add(day_count(spec.ri.quantile(u)?)?)
            .ok_or_else(|| SynthError::InvalidSpec("event index overflow".into()))?;
        indices.push(at);
        sizes.push(spec.gpd.quantile(v)?);
    }
    if spec.pairing == Pairing::Start {
        sizes.push(loose_size);
    }
    Ok(EventSeries::from_parts(T::zero(), indices, sizes)?)
}

/// A return series of `len` days in which the events are the only days above
/// `baseline`: event days carry `baseline + y`, all other days `baseline`.
/// Any empirical quantile level below the share of non-event days then
/// yields the threshold `baseline` and recovers exactly these events.
pub fn embed_in_returns<T: Real>(events: &EventSeries<T>, len: usize, baseline: T) -> Result<Vec<T>, SynthError> {
    let last = *events.indices().last().expect("event series is never empty");
    if len <= last {
        return Err(SynthError::InvalidSpec(format!("length {len} does not cover event day {last}")));
    }
    let mut r = vec![baseline; len];
    for (&i, &y) in events.indices().iter().zip(events.y()) {
        r[i] = baseline + y;
    }
    Ok(r)
}
