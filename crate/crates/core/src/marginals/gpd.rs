use serde::{Deserialize, Serialize};

use super::{MarginalError, SINGULAR_TOL};
use crate::optim::{nelder_mead_max, NelderMeadOptions};
use crate::scalar::Real;

/// Generalized Pareto law of exceeding sizes with tail index ξ and scale φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GpdParams<T>", bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GpdModel<T: Real> {
    pub xi: T,
    pub phi: T,
}

#[derive(Deserialize)]
#[serde(bound = "")]
struct GpdParams<T: Real> {
    xi: T,
    phi: T,
}

impl<T: Real> TryFrom<GpdParams<T>> for GpdModel<T> {
    type Error = MarginalError;

    fn try_from(p: GpdParams<T>) -> Result<Self, Self::Error> {
        GpdModel::new(p.xi, p.phi)
    }
}

impl<T: Real> GpdModel<T> {
    pub fn new(xi: T, phi: T) -> Result<Self, MarginalError> {
        if !xi.is_finite() {
            return Err(MarginalError::InvalidParameters { family: "gpd", reason: format!("xi = {xi}") });
        }
        if !(phi > T::zero()) || !phi.is_finite() {
            return Err(MarginalError::InvalidParameters {
                family: "gpd",
                reason: format!("phi = {phi} must be positive"),
            });
        }
        Ok(Self { xi, phi })
    }

    fn exponential(&self) -> bool {
        self.xi.abs() < T::lit(SINGULAR_TOL)
    }

    /// Upper end of the support: −φ/ξ for ξ < 0, otherwise ∞.
    pub fn support_end(&self) -> T {
        if self.xi < T::zero() && !self.exponential() {
            -self.phi / self.xi
        } else {
            T::infinity()
        }
    }

    fn check(&self, y: T) -> Result<(), MarginalError> {
        if !(y >= T::zero()) || y > self.support_end() {
            return Err(MarginalError::OutsideSupport { value: y.to_f64_lossless() });
        }
        Ok(())
    }

    /// ln g(y); −∞ outside the support.
    pub fn ln_pdf(&self, y: T) -> T {
        if !(y >= T::zero()) {
            return T::neg_infinity();
        }
        let z = y / self.phi;
        if self.exponential() {
            return -self.phi.ln() - z;
        }
        let w = self.xi * z;
        if w <= -T::one() {
            return T::neg_infinity();
        }
        -self.phi.ln() - (T::one() / self.xi + T::one()) * w.ln_1p()
    }

    pub fn pdf(&self, y: T) -> Result<T, MarginalError> {
        self.check(y)?;
        Ok(self.ln_pdf(y).exp())
    }

    /// G(y).
    pub fn cdf(&self, y: T) -> Result<T, MarginalError> {
        self.check(y)?;
        Ok(-self.ln_sf(y).exp_m1())
    }

    pub fn sf(&self, y: T) -> Result<T, MarginalError> {
        self.check(y)?;
        Ok(self.ln_sf(y).exp())
    }

    fn ln_sf(&self, y: T) -> T {
        let z = y / self.phi;
        if self.exponential() {
            return -z;
        }
        let w = self.xi * z;
        if w <= -T::one() {
            return T::neg_infinity();
        }
        -w.ln_1p() / self.xi
    }

    /// Inverse CDF: φ((1−p)^{−ξ} − 1)/ξ, or −φ ln(1−p) when ξ = 0.
    pub fn quantile(&self, p: T) -> Result<T, MarginalError> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(MarginalError::OutsideSupport { value: p.to_f64_lossless() });
        }
        if p == T::one() {
            return Ok(self.support_end());
        }
        let ln_s = (-p).ln_1p();
        Ok(if self.exponential() {
            -self.phi * ln_s
        } else {
            self.phi * (-self.xi * ln_s).exp_m1() / self.xi
        })
    }

    /// −n ln φ − (1/ξ + 1) Σ ln(1 + ξ yᵢ/φ).
    pub fn log_likelihood(&self, sample: &[T]) -> T {
        gpd_loglik(sample, self.xi, self.phi)
    }
}

fn gpd_loglik<T: Real>(sample: &[T], xi: T, phi: T) -> T {
    if !(phi > T::zero()) || !(xi > -T::one()) || !xi.is_finite() {
        return T::neg_infinity();
    }
    let n = T::from_count(sample.len());
    if xi.abs() < T::lit(SINGULAR_TOL) {
        let s: T = sample.iter().copied().sum();
        return -n * phi.ln() - s / phi;
    }
    let mut acc = T::zero();
    for &y in sample {
        let w = xi * y / phi;
        if w <= -T::one() {
            return T::neg_infinity();
        }
        acc = acc + w.ln_1p();
    }
    -n * phi.ln() - (T::one() / xi + T::one()) * acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFitOptions {
    pub min_sample: usize,
    pub max_iter: usize,
    /// Extra restarts allowed when the neighborhood check finds a better point.
    pub max_restarts: usize,
}

impl Default for GpdFitOptions {
    fn default() -> Self {
        Self { min_sample: 10, max_iter: 5_000, max_restarts: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GpdFit<T: Real> {
    #[serde(flatten)]
    pub model: GpdModel<T>,
    #[serde(rename = "lnL")]
    pub loglik: T,
    pub n: usize,
    /// Simplex iterations summed over all starts.
    #[serde(default)]
    pub iterations: usize,
}

/// Maximum-likelihood GPD fit by multi-start Nelder–Mead over (ξ, ln φ).
///
/// The result is accepted only if no point of a 3×3 neighborhood around it
/// has a higher likelihood; otherwise the simplex is restarted there.
/// ξ is restricted to (−1, ∞), where the likelihood is bounded.
pub fn fit_gpd<T: Real>(sample: &[T], opts: &GpdFitOptions) -> Result<GpdFit<T>, MarginalError> {
    if sample.len() < opts.min_sample.max(2) {
        return Err(MarginalError::SampleTooSmall { len: sample.len(), min: opts.min_sample.max(2) });
    }
    if let Some(i) = sample.iter().position(|y| !(*y >= T::zero()) || !y.is_finite()) {
        return Err(MarginalError::InvalidObservation { index: i, value: sample[i].to_f64_lossless() });
    }
    if sample.iter().all(|&y| y == sample[0]) {
        return Err(MarginalError::DegenerateSample(sample.len()));
    }
    let n = T::from_count(sample.len());
    let mean = sample.iter().copied().sum::<T>() / n;
    let var = sample.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>() / (n - T::one());
    let ratio = mean * mean / var;
    let xi_mom = (T::half() * (T::one() - ratio)).max(T::lit(-0.45)).min(T::lit(0.9));
    let phi_mom = T::half() * mean * (T::one() + ratio);

    let objective = |p: [T; 2]| gpd_loglik(sample, p[0], p[1].exp());
    let nm = NelderMeadOptions { max_iter: opts.max_iter, ..NelderMeadOptions::default() };
    let step = [T::lit(0.1), T::lit(0.2)];
    let starts = [
        [xi_mom, phi_mom.ln()],
        [T::zero(), mean.ln()],
        [T::lit(0.3), (T::lit(0.7) * mean).ln()],
        [T::lit(-0.2), (T::lit(1.2) * mean).ln()],
    ];

    let mut iterations = 0;
    let mut best: Option<(crate::optim::NelderMeadResult<T>, bool)> = None;
    for s in starts {
        if !objective(s).is_finite() {
            continue;
        }
        let r = nelder_mead_max(objective, s, step, nm);
        iterations += r.iterations;
        if best.as_ref().is_none_or(|(b, _)| r.value > b.value) {
            best = Some((r, r.converged));
        }
    }
    let (mut cur, mut converged) = best.ok_or(MarginalError::NonConvergence {
        iterations,
        xi: xi_mom.to_f64_lossless(),
        phi: phi_mom.to_f64_lossless(),
        loglik: f64::NEG_INFINITY,
    })?;

    let delta = T::lit(1e-3);
    let mut restarts = 0;
    loop {
        let mut better = None;
        let slack = T::lit(1e-9) * (T::one() + cur.value.abs());
        for dx in [-delta, T::zero(), delta] {
            for dy in [-delta, T::zero(), delta] {
                let p = [cur.x[0] + dx, cur.x[1] + dy];
                let v = objective(p);
                if v > cur.value + slack && better.is_none_or(|(_, bv)| v > bv) {
                    better = Some((p, v));
                }
            }
        }
        match better {
            None if converged => break,
            _ if restarts >= opts.max_restarts => {
                return Err(MarginalError::NonConvergence {
                    iterations,
                    xi: cur.x[0].to_f64_lossless(),
                    phi: cur.x[1].exp().to_f64_lossless(),
                    loglik: cur.value.to_f64_lossless(),
                });
            }
            found => {
                restarts += 1;
                let from = found.map_or(cur.x, |(p, _)| p);
                let r = nelder_mead_max(objective, from, [delta * T::lit(10.0), delta * T::lit(10.0)], nm);
                iterations += r.iterations;
                if r.value >= cur.value {
                    cur = r;
                }
                converged = r.converged;
            }
        }
    }

    let model = GpdModel::new(cur.x[0], cur.x[1].exp())?;
    Ok(GpdFit {
        loglik: model.log_likelihood(sample),
        model,
        n: sample.len(),
        iterations,
    })
}
