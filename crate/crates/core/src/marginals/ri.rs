use serde::{Deserialize, Serialize};

use super::{MarginalError, SINGULAR_TOL};
use crate::optim::{maximize_scalar, LineSearch};
use crate::scalar::Real;
use crate::special::{gamma_p, gamma_p_inv, gamma_q, ln_gamma};

/// Recurrence-interval distribution family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiFamily {
    StretchedExponential,
    QExponential,
    Weibull,
}

impl RiFamily {
    pub const ALL: [RiFamily; 3] = [RiFamily::StretchedExponential, RiFamily::QExponential, RiFamily::Weibull];

    pub fn name(self) -> &'static str {
        match self {
            RiFamily::StretchedExponential => "stretched_exponential",
            RiFamily::QExponential => "q_exponential",
            RiFamily::Weibull => "weibull",
        }
    }

    /// Open interval searched when fitting the shape parameter.
    pub fn shape_range(self) -> (f64, f64) {
        match self {
            RiFamily::StretchedExponential | RiFamily::Weibull => (0.0, 1.0),
            RiFamily::QExponential => (0.0, 1.5),
        }
    }
}

impl std::str::FromStr for RiFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stretched_exponential" | "se" => Ok(RiFamily::StretchedExponential),
            "q_exponential" | "qe" => Ok(RiFamily::QExponential),
            "weibull" | "w" => Ok(RiFamily::Weibull),
            other => Err(format!("unknown recurrence-interval family `{other}`")),
        }
    }
}

impl std::fmt::Display for RiFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Family constants derived once from (shape, τ_Q).
#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel<T> {
    /// p(τ) = a·exp(−(bτ)^μ)
    Stretched { mu: T, ln_a: T, ln_b: T },
    /// p(τ) = (2−q)λ[1+(q−1)λτ]^{−1/(q−1)}; `exponential` flags |q−1| < 1e-9.
    QExp { q: T, lambda: T, ln_norm: T, exponential: bool },
    /// p(τ) = (α/β)(τ/β)^{α−1} exp(−(τ/β)^α)
    Weibull { alpha: T, ln_beta: T },
}

/// A recurrence-interval law whose mean is pinned to τ_Q, so a single shape
/// parameter remains free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "RiParams<T>",
    try_from = "RiParams<T>",
    bound(serialize = "T: Real", deserialize = "T: Real")
)]
pub struct RiModel<T> {
    family: RiFamily,
    shape: T,
    tau_mean: T,
    kernel: Kernel<T>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound = "")]
struct RiParams<T: Real> {
    family: RiFamily,
    shape: T,
    tau_mean: T,
}

impl<T: Real> From<RiModel<T>> for RiParams<T> {
    fn from(m: RiModel<T>) -> Self {
        Self { family: m.family, shape: m.shape, tau_mean: m.tau_mean }
    }
}

impl<T: Real> TryFrom<RiParams<T>> for RiModel<T> {
    type Error = MarginalError;

    fn try_from(p: RiParams<T>) -> Result<Self, Self::Error> {
        RiModel::new(p.family, p.shape, p.tau_mean)
    }
}

impl<T: Real> RiModel<T> {
    /// `shape` is μ, q or α for the respective family; `tau_mean` is τ_Q in days.
    pub fn new(family: RiFamily, shape: T, tau_mean: T) -> Result<Self, MarginalError> {
        let invalid = |reason: String| MarginalError::InvalidParameters { family: family.name(), reason };
        if !(tau_mean > T::zero()) || !tau_mean.is_finite() {
            return Err(invalid(format!("mean interval {tau_mean} must be positive")));
        }
        if !shape.is_finite() {
            return Err(invalid(format!("shape {shape} is not finite")));
        }
        let one = T::one();
        let ln_tq = tau_mean.ln();
        let kernel = match family {
            RiFamily::StretchedExponential => {
                if !(shape > T::zero()) {
                    return Err(invalid(format!("mu = {shape} must be positive")));
                }
                let lg1 = ln_gamma(one / shape);
                let lg2 = ln_gamma(T::two() / shape);
                Kernel::Stretched {
                    mu: shape,
                    ln_a: shape.ln() + lg2 - T::two() * lg1 - ln_tq,
                    ln_b: lg2 - lg1 - ln_tq,
                }
            }
            RiFamily::QExponential => {
                if !(shape > T::zero() && shape < T::lit(1.5)) {
                    return Err(invalid(format!("q = {shape} outside (0, 1.5)")));
                }
                let lambda = one / (tau_mean * (T::lit(3.0) - T::two() * shape));
                Kernel::QExp {
                    q: shape,
                    lambda,
                    ln_norm: (lambda * (T::two() - shape)).ln(),
                    exponential: (shape - one).abs() < T::lit(SINGULAR_TOL),
                }
            }
            RiFamily::Weibull => {
                if !(shape > T::zero()) {
                    return Err(invalid(format!("alpha = {shape} must be positive")));
                }
                Kernel::Weibull {
                    alpha: shape,
                    ln_beta: ln_tq - ln_gamma(one + one / shape),
                }
            }
        };
        Ok(Self { family, shape, tau_mean, kernel })
    }

    /// q-exponential with rate λ instead of τ_Q.
    pub fn q_exponential_with_rate(q: T, lambda: T) -> Result<Self, MarginalError> {
        let tq = T::one() / (lambda * (T::lit(3.0) - T::two() * q));
        Self::new(RiFamily::QExponential, q, tq)
    }

    /// Weibull with scale β instead of τ_Q.
    pub fn weibull_with_scale(alpha: T, beta: T) -> Result<Self, MarginalError> {
        let tq = beta * (ln_gamma(T::one() + T::one() / alpha)).exp();
        Self::new(RiFamily::Weibull, alpha, tq)
    }

    pub fn family(&self) -> RiFamily {
        self.family
    }

    /// μ, q or α.
    pub fn shape(&self) -> T {
        self.shape
    }

    pub fn tau_mean(&self) -> T {
        self.tau_mean
    }

    /// (a, b) of the stretched exponential.
    pub fn se_coefficients(&self) -> Option<(T, T)> {
        match self.kernel {
            Kernel::Stretched { ln_a, ln_b, .. } => Some((ln_a.exp(), ln_b.exp())),
            _ => None,
        }
    }

    /// λ of the q-exponential.
    pub fn qe_lambda(&self) -> Option<T> {
        match self.kernel {
            Kernel::QExp { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    /// β of the Weibull.
    pub fn weibull_scale(&self) -> Option<T> {
        match self.kernel {
            Kernel::Weibull { ln_beta, .. } => Some(ln_beta.exp()),
            _ => None,
        }
    }

    /// Upper end of the support (finite only for q < 1).
    pub fn support_end(&self) -> T {
        match self.kernel {
            Kernel::QExp { q, lambda, exponential, .. } if !exponential && q < T::one() => {
                T::one() / ((T::one() - q) * lambda)
            }
            _ => T::infinity(),
        }
    }

    /// ln p(τ) for τ > 0; −∞ outside the support.
    pub fn ln_pdf(&self, tau: T) -> T {
        if !(tau > T::zero()) {
            return T::neg_infinity();
        }
        match self.kernel {
            Kernel::Stretched { mu, ln_a, ln_b } => ln_a - (mu * (ln_b + tau.ln())).exp(),
            Kernel::QExp { q, lambda, ln_norm, exponential } => {
                if exponential {
                    return lambda.ln() - lambda * tau;
                }
                let z = (q - T::one()) * lambda * tau;
                if z <= -T::one() {
                    return T::neg_infinity();
                }
                ln_norm - z.ln_1p() / (q - T::one())
            }
            Kernel::Weibull { alpha, ln_beta } => {
                let l = tau.ln() - ln_beta;
                alpha.ln() - ln_beta + (alpha - T::one()) * l - (alpha * l).exp()
            }
        }
    }

    pub fn pdf(&self, tau: T) -> Result<T, MarginalError> {
        if !(tau > T::zero()) {
            return Err(MarginalError::OutsideSupport { value: tau.to_f64_lossless() });
        }
        Ok(self.ln_pdf(tau).exp())
    }

    /// P(τ) = ∫₀^τ p.
    pub fn cdf(&self, tau: T) -> Result<T, MarginalError> {
        if !(tau >= T::zero()) {
            return Err(MarginalError::OutsideSupport { value: tau.to_f64_lossless() });
        }
        Ok(match self.kernel {
            Kernel::Stretched { mu, ln_b, .. } => {
                if tau == T::zero() {
                    T::zero()
                } else {
                    gamma_p(T::one() / mu, (mu * (ln_b + tau.ln())).exp())
                }
            }
            _ => T::one() - self.sf_unchecked(tau),
        })
    }

    /// Survival 1 − P(τ), computed without cancellation.
    pub fn sf(&self, tau: T) -> Result<T, MarginalError> {
        if !(tau >= T::zero()) {
            return Err(MarginalError::OutsideSupport { value: tau.to_f64_lossless() });
        }
        Ok(self.sf_unchecked(tau))
    }

    fn sf_unchecked(&self, tau: T) -> T {
        if tau == T::zero() {
            return T::one();
        }
        if tau.is_infinite() {
            return T::zero();
        }
        match self.kernel {
            Kernel::Stretched { mu, ln_b, .. } => gamma_q(T::one() / mu, (mu * (ln_b + tau.ln())).exp()),
            Kernel::QExp { q, lambda, exponential, .. } => {
                if exponential {
                    return (-lambda * tau).exp();
                }
                let z = (q - T::one()) * lambda * tau;
                if z <= -T::one() {
                    return T::zero();
                }
                ((q - T::two()) / (q - T::one()) * z.ln_1p()).exp()
            }
            Kernel::Weibull { alpha, ln_beta } => (-(alpha * (tau.ln() - ln_beta)).exp()).exp(),
        }
    }

    /// Inverse CDF for p ∈ [0, 1].
    pub fn quantile(&self, p: T) -> Result<T, MarginalError> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(MarginalError::OutsideSupport { value: p.to_f64_lossless() });
        }
        if p == T::zero() {
            return Ok(T::zero());
        }
        if p == T::one() {
            return Ok(self.support_end());
        }
        let ln_s = (-p).ln_1p();
        Ok(match self.kernel {
            Kernel::Stretched { mu, ln_b, .. } => {
                let x = gamma_p_inv(T::one() / mu, p);
                (x.ln() / mu - ln_b).exp()
            }
            Kernel::QExp { q, lambda, exponential, .. } => {
                if exponential {
                    -ln_s / lambda
                } else {
                    let qm1 = q - T::one();
                    (qm1 / (q - T::two()) * ln_s).exp_m1() / (qm1 * lambda)
                }
            }
            Kernel::Weibull { alpha, ln_beta } => ((-ln_s).ln() / alpha + ln_beta).exp(),
        })
    }

    /// Σ ln p(τᵢ).
    pub fn log_likelihood(&self, sample: &[T]) -> T {
        LogLik::new(sample).eval(self)
    }
}

/// Sample summaries reused across likelihood evaluations.
struct LogLik<T> {
    n: T,
    taus: Vec<T>,
    ln_taus: Vec<T>,
    sum_tau: T,
}

impl<T: Real> LogLik<T> {
    fn new(sample: &[T]) -> Self {
        Self {
            n: T::from_count(sample.len()),
            taus: sample.to_vec(),
            ln_taus: sample.iter().map(|t| t.ln()).collect(),
            sum_tau: sample.iter().copied().sum(),
        }
    }

    /// The constrained log-likelihood of each family at the model's shape.
    fn eval(&self, m: &RiModel<T>) -> T {
        let one = T::one();
        let v = match m.kernel {
            Kernel::Stretched { mu, ln_a, ln_b } => {
                let s: T = self.ln_taus.iter().map(|&lt| (mu * (ln_b + lt)).exp()).sum();
                self.n * ln_a - s
            }
            Kernel::QExp { q, lambda, ln_norm, exponential } => {
                if exponential {
                    self.n * lambda.ln() - lambda * self.sum_tau
                } else {
                    let qm1 = q - one;
                    let mut s = T::zero();
                    for &t in &self.taus {
                        let z = qm1 * lambda * t;
                        if z <= -one {
                            return T::neg_infinity();
                        }
                        s = s + z.ln_1p();
                    }
                    self.n * ln_norm - s / qm1
                }
            }
            Kernel::Weibull { alpha, ln_beta } => {
                let s: T = self
                    .ln_taus
                    .iter()
                    .map(|&lt| {
                        let l = lt - ln_beta;
                        (alpha - one) * l - (alpha * l).exp()
                    })
                    .sum();
                self.n * (alpha.ln() - ln_beta) + s
            }
        };
        if v.is_nan() {
            T::neg_infinity()
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiFitOptions {
    pub search: LineSearch,
    pub min_sample: usize,
}

impl Default for RiFitOptions {
    fn default() -> Self {
        Self { search: LineSearch::default(), min_sample: 10 }
    }
}

/// Maximum-likelihood recurrence-interval fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "RiFitRecord<T>",
    try_from = "RiFitRecord<T>",
    bound(serialize = "T: Real", deserialize = "T: Real")
)]
pub struct RiFit<T: Real> {
    pub model: RiModel<T>,
    pub loglik: T,
    pub n: usize,
    /// The maximizer sits on the edge of the admissible shape range.
    pub at_boundary: bool,
}

/// Serialized form, named after the usual fit-table columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
struct RiFitRecord<T: Real> {
    family: RiFamily,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mu: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    a: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    b: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    q: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    lambda: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    alpha: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    beta: Option<T>,
    tau_mean: T,
    #[serde(rename = "lnL")]
    loglik: T,
    n: usize,
    #[serde(default)]
    at_boundary: bool,
}

impl<T: Real> From<RiFit<T>> for RiFitRecord<T> {
    fn from(f: RiFit<T>) -> Self {
        let m = f.model;
        let mut r = RiFitRecord {
            family: m.family,
            mu: None,
            a: None,
            b: None,
            q: None,
            lambda: None,
            alpha: None,
            beta: None,
            tau_mean: m.tau_mean,
            loglik: f.loglik,
            n: f.n,
            at_boundary: f.at_boundary,
        };
        match m.family {
            RiFamily::StretchedExponential => {
                let (a, b) = m.se_coefficients().expect("stretched kernel");
                r.mu = Some(m.shape);
                r.a = Some(a);
                r.b = Some(b);
            }
            RiFamily::QExponential => {
                r.q = Some(m.shape);
                r.lambda = m.qe_lambda();
            }
            RiFamily::Weibull => {
                r.alpha = Some(m.shape);
                r.beta = m.weibull_scale();
            }
        }
        r
    }
}

impl<T: Real> TryFrom<RiFitRecord<T>> for RiFit<T> {
    type Error = MarginalError;

    fn try_from(r: RiFitRecord<T>) -> Result<Self, Self::Error> {
        let shape = match r.family {
            RiFamily::StretchedExponential => r.mu,
            RiFamily::QExponential => r.q,
            RiFamily::Weibull => r.alpha,
        }
        .ok_or_else(|| MarginalError::InvalidParameters {
            family: r.family.name(),
            reason: "missing shape parameter".into(),
        })?;
        Ok(RiFit {
            model: RiModel::new(r.family, shape, r.tau_mean)?,
            loglik: r.loglik,
            n: r.n,
            at_boundary: r.at_boundary,
        })
    }
}

fn check_sample<T: Real>(sample: &[T], min: usize) -> Result<(), MarginalError> {
    if sample.len() < min {
        return Err(MarginalError::SampleTooSmall { len: sample.len(), min });
    }
    if let Some(i) = sample.iter().position(|t| !(*t > T::zero()) || !t.is_finite()) {
        return Err(MarginalError::InvalidObservation { index: i, value: sample[i].to_f64_lossless() });
    }
    if sample.iter().all(|&t| t == sample[0]) {
        return Err(MarginalError::DegenerateSample(sample.len()));
    }
    Ok(())
}

/// Fits the shape parameter by maximizing the constrained log-likelihood,
/// with τ_Q set to the sample mean.
pub fn fit_ri<T: Real>(sample: &[T], family: RiFamily, opts: &RiFitOptions) -> Result<RiFit<T>, MarginalError> {
    check_sample(sample, opts.min_sample.max(2))?;
    let ll = LogLik::new(sample);
    let tau_mean = ll.sum_tau / ll.n;
    let (lo, hi) = family.shape_range();
    let step = 1e-6;
    let objective = |shape: T| match RiModel::new(family, shape, tau_mean) {
        Ok(m) => ll.eval(&m),
        Err(_) => T::neg_infinity(),
    };
    let opt = maximize_scalar(objective, T::lit(lo + step), T::lit(hi - step), opts.search, T::lit(10.0 * step));
    let model = RiModel::new(family, opt.x, tau_mean)?;
    Ok(RiFit {
        loglik: ll.eval(&model),
        model,
        n: sample.len(),
        at_boundary: opt.at_boundary,
    })
}

/// Fits every family; results keep the order of [`RiFamily::ALL`].
pub fn fit_all_ri<T: Real>(sample: &[T], opts: &RiFitOptions) -> Result<Vec<RiFit<T>>, MarginalError> {
    RiFamily::ALL.iter().map(|&f| fit_ri(sample, f, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, integrate_to_infinity};

    fn models() -> Vec<RiModel<f64>> {
        vec![
            RiModel::new(RiFamily::StretchedExponential, 0.72, 9.606).unwrap(),
            RiModel::new(RiFamily::StretchedExponential, 0.3, 4.0).unwrap(),
            RiModel::new(RiFamily::QExponential, 1.21, 9.606).unwrap(),
            RiModel::new(RiFamily::QExponential, 0.8, 5.0).unwrap(),
            RiModel::new(RiFamily::QExponential, 1.0, 7.0).unwrap(),
            RiModel::new(RiFamily::Weibull, 0.93, 9.606).unwrap(),
            RiModel::new(RiFamily::Weibull, 0.4, 3.0).unwrap(),
        ]
    }

    #[test]
    fn exponential_limit_of_q_exponential() {
        let m = RiModel::q_exponential_with_rate(1.0_f64, 1.0).unwrap();
        assert!((m.pdf(1e-300).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.cdf(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        let near = RiModel::q_exponential_with_rate(1.0 + 1e-10, 1.0).unwrap();
        assert!((near.pdf(0.7).unwrap() - (-0.7f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn weibull_analytic_pdf() {
        let m = RiModel::weibull_with_scale(1.0, 2.0).unwrap();
        assert!((m.pdf(2.0).unwrap() - (-1.0f64).exp() / 2.0).abs() < 1e-15);
        assert!((m.weibull_scale().unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let m = RiModel::new(RiFamily::Weibull, 0.9, 10.0).unwrap();
        assert!(m.pdf(0.0).is_err());
        assert!(m.pdf(-1.0).is_err());
        assert!(m.cdf(-1e-9).is_err());
        assert_eq!(m.cdf(0.0).unwrap(), 0.0);
        assert!(RiModel::new(RiFamily::QExponential, 1.5, 10.0).is_err());
        assert!(RiModel::new(RiFamily::StretchedExponential, 0.0, 10.0).is_err());
        assert!(RiModel::new(RiFamily::Weibull, 0.5, -1.0).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        for m in models() {
            let end = m.support_end();
            let q = if end.is_finite() {
                integrate(|t| m.ln_pdf(t).exp(), 0.0, end, 1e-12, 1e-12)
            } else {
                integrate_to_infinity(|t| m.ln_pdf(t).exp(), 0.0, 1e-12, 1e-12)
            };
            assert!((q.value - 1.0).abs() < 1e-6, "{:?}: {}", m.family(), q.value);
        }
    }

    #[test]
    fn mean_is_tau_q() {
        for m in models() {
            let q = integrate_to_infinity(|t| t * m.ln_pdf(t).exp(), 0.0, 1e-10, 1e-10);
            assert!((q.value - m.tau_mean()).abs() < 1e-5 * m.tau_mean(), "{:?}", m.family());
        }
    }

    #[test]
    fn cdf_matches_quadrature_of_pdf() {
        let se = RiModel::new(RiFamily::StretchedExponential, 0.72_f64, 9.6).unwrap();
        let q = integrate(|t| se.ln_pdf(t).exp(), 0.0, 50.0, 1e-13, 1e-13);
        assert!((se.cdf(50.0).unwrap() - q.value).abs() < 1e-8);
        for m in models() {
            for &t in &[0.5_f64, 3.0, 12.0, 40.0] {
                let t: f64 = t.min(m.support_end() * 0.99);
                // x = s⁴ removes the integrable singularity at 0 for shapes below 1
                let q = integrate(
                    |s: f64| 4.0 * s.powi(3) * m.ln_pdf(s.powi(4)).exp(),
                    0.0,
                    t.powf(0.25),
                    1e-13,
                    1e-13,
                );
                assert!((m.cdf(t).unwrap() - q.value).abs() < 1e-9, "{:?} t={t}", m.family());
            }
        }
    }

    #[test]
    fn cdf_limits_and_monotonicity() {
        for m in models() {
            assert_eq!(m.cdf(0.0).unwrap(), 0.0);
            let far = if m.support_end().is_finite() { m.support_end() } else { 1e9 };
            assert!((m.cdf(far).unwrap() - 1.0).abs() < 1e-6);
            let mut prev = 0.0;
            for i in 1..400 {
                let c = m.cdf(i as f64 * 0.25).unwrap();
                assert!(c >= prev);
                prev = c;
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for m in models() {
            for &p in &[1e-6, 0.01, 0.25, 0.5, 0.9, 0.999] {
                let t = m.quantile(p).unwrap();
                assert!((m.cdf(t).unwrap() - p).abs() < 1e-10, "{:?} p={p}", m.family());
            }
        }
    }

    #[test]
    fn loglik_matches_sum_of_log_densities() {
        let sample = [1.0, 2.0, 2.0, 5.0, 9.0, 14.0, 1.0, 33.0, 4.0, 7.0];
        for m in models() {
            let direct: f64 = sample.iter().map(|&t| m.ln_pdf(t)).sum();
            let ll = m.log_likelihood(&sample);
            if direct.is_finite() {
                assert!((direct - ll).abs() < 1e-10 * direct.abs(), "{:?}", m.family());
            } else {
                assert_eq!(ll, f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn bounded_q_support_excludes_long_intervals() {
        let m = RiModel::new(RiFamily::QExponential, 0.5_f64, 2.0).unwrap();
        let end = m.support_end();
        assert!(end.is_finite());
        assert_eq!(m.ln_pdf(end * 1.01), f64::NEG_INFINITY);
        assert_eq!(m.cdf(end * 1.01).unwrap(), 1.0);
        assert_eq!(m.log_likelihood(&[1.0, end * 2.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn fit_rejects_bad_samples() {
        let opts = RiFitOptions::default();
        assert!(matches!(fit_ri(&[1.0; 5], RiFamily::Weibull, &opts), Err(MarginalError::SampleTooSmall { .. })));
        assert!(matches!(fit_ri(&[3.0; 20], RiFamily::Weibull, &opts), Err(MarginalError::DegenerateSample(20))));
        let mut s = vec![1.0; 20];
        s[3] = 0.0;
        s[4] = 2.0;
        assert!(matches!(fit_ri(&s, RiFamily::Weibull, &opts), Err(MarginalError::InvalidObservation { index: 3, .. })));
    }

    #[test]
    fn fit_round_trips_through_json() {
        let sample: Vec<f64> = (1..=50).map(|i| ((i * 7) % 23 + 1) as f64).collect();
        for fam in RiFamily::ALL {
            let fit = fit_ri(&sample, fam, &RiFitOptions::default()).unwrap();
            let json = serde_json::to_string(&fit).unwrap();
            assert!(json.contains("lnL"));
            let back: RiFit<f64> = serde_json::from_str(&json).unwrap();
            assert_eq!(back, fit);
        }
    }
}
