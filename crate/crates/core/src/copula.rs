//! Frank and Ali–Mikhail–Haq copulas: distribution, density, conditional
//! distribution, one-parameter maximum likelihood on pseudo-observations and
//! RMSE/AIC goodness of fit against the empirical joint distribution.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marginals::{GpdModel, RiModel};
use crate::optim::{maximize_scalar, LineSearch, ScalarOptimum};
use crate::scalar::Real;

/// Pseudo-observations are kept inside `[PSEUDO_CLAMP, 1 − PSEUDO_CLAMP]`.
pub const PSEUDO_CLAMP: f64 = 1e-9;
/// |θ| below this is treated as the independence copula.
pub const INDEPENDENCE_TOL: f64 = 1e-10;
/// Frank search range is `[−FRANK_MAX, −FRANK_GAP] ∪ [FRANK_GAP, FRANK_MAX]`.
pub const FRANK_MAX: f64 = 50.0;
pub const FRANK_GAP: f64 = 1e-4;
pub const AMH_LOWER: f64 = -1.0 + 1e-9;
pub const AMH_UPPER: f64 = 1.0 - 1e-6;
/// Tolerance of the bisection used to invert the conditional distribution.
pub const INVERSION_TOL: f64 = 1e-10;

const BOUNDARY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CopulaError {
    #[error("{family} copula: theta = {theta} outside the admissible range")]
    InvalidTheta { family: CopulaFamily, theta: f64 },
    #[error("point ({u}, {v}) outside the unit square")]
    OutsideUnitSquare { u: f64, v: f64 },
    #[error("sample of {len} pairs, need at least {min}")]
    SampleTooSmall { len: usize, min: usize },
    #[error("u and v differ in length ({u} vs {v})")]
    LengthMismatch { u: usize, v: usize },
    #[error("observation {index} = {value} is not a probability")]
    InvalidObservation { index: usize, value: f64 },
    #[error("degenerate pseudo-sample: all {0} values are equal")]
    Degenerate(&'static str),
    #[error("cannot invert conditional distribution (theta = {theta}, u = {u}, quantile = {w})")]
    InversionFailed { theta: f64, u: f64, w: f64 },
    #[error("no copula could be fitted (frank: {frank}; amh: {amh})")]
    BothFitsFailed { frank: String, amh: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Frank,
    Amh,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 2] = [CopulaFamily::Frank, CopulaFamily::Amh];

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Frank => "frank",
            CopulaFamily::Amh => "amh",
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CopulaFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "frank" => Ok(CopulaFamily::Frank),
            "amh" => Ok(CopulaFamily::Amh),
            other => Err(format!("unknown copula `{other}` (expected frank|amh)")),
        }
    }
}

/// A member of one of the two families. θ = 0 is accepted for both and gives
/// the independence copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CopulaParams<T>", bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Copula<T: Real> {
    pub family: CopulaFamily,
    pub theta: T,
}

#[derive(Deserialize)]
#[serde(bound = "")]
struct CopulaParams<T: Real> {
    family: CopulaFamily,
    theta: T,
}

impl<T: Real> TryFrom<CopulaParams<T>> for Copula<T> {
    type Error = CopulaError;

    fn try_from(p: CopulaParams<T>) -> Result<Self, Self::Error> {
        Copula::new(p.family, p.theta)
    }
}

fn in_unit<T: Real>(x: T) -> bool {
    x >= T::zero() && x <= T::one()
}

impl<T: Real> Copula<T> {
    pub fn new(family: CopulaFamily, theta: T) -> Result<Self, CopulaError> {
        let ok = theta.is_finite()
            && match family {
                CopulaFamily::Frank => true,
                CopulaFamily::Amh => theta >= -T::one() && theta < T::one(),
            };
        if !ok {
            return Err(CopulaError::InvalidTheta { family, theta: theta.to_f64_lossless() });
        }
        Ok(Self { family, theta })
    }

    pub fn independence(family: CopulaFamily) -> Self {
        Self { family, theta: T::zero() }
    }

    pub fn is_independent(&self) -> bool {
        self.theta.abs() < T::lit(INDEPENDENCE_TOL)
    }

    fn check(u: T, v: T) -> Result<(), CopulaError> {
        if in_unit(u) && in_unit(v) {
            Ok(())
        } else {
            Err(CopulaError::OutsideUnitSquare { u: u.to_f64_lossless(), v: v.to_f64_lossless() })
        }
    }

    /// C(u, v).
    pub fn cdf(&self, u: T, v: T) -> Result<T, CopulaError> {
        Self::check(u, v)?;
        Ok(self.cdf_unchecked(u, v))
    }

    pub(crate) fn cdf_unchecked(&self, u: T, v: T) -> T {
        let one = T::one();
        if u == T::zero() || v == T::zero() {
            return T::zero();
        }
        if u == one {
            return v;
        }
        if v == one {
            return u;
        }
        if self.is_independent() {
            return u * v;
        }
        let th = self.theta;
        let c = match self.family {
            CopulaFamily::Frank => {
                let a = (-th * u).exp_m1();
                let b_over_g = (-th * v).exp_m1() / (-th).exp_m1();
                let x = a * b_over_g;
                if th > T::zero() && x < -T::half() {
                    // 1 + x = D/(1 − e^{−θ}) is close to 0
                    -(frank_ln_d(th, u, v, one - v) - (-(-th).exp_m1()).ln()) / th
                } else {
                    -x.ln_1p() / th
                }
            }
            CopulaFamily::Amh => u * v / (one - th * (one - u) * (one - v)),
        };
        let lower = (u + v - one).max(T::zero());
        c.max(lower).min(u.min(v))
    }

    /// v − C(1 − s, v), the mass of {U > 1 − s, V ≤ v}, computed without
    /// forming 1 − s.
    pub fn upper_u_mass(&self, s: T, v: T) -> Result<T, CopulaError> {
        Self::check(s, v)?;
        let one = T::one();
        if s == T::zero() || v == T::zero() {
            return Ok(T::zero());
        }
        if s == one {
            return Ok(v);
        }
        if v == one {
            return Ok(s);
        }
        if self.is_independent() {
            return Ok(s * v);
        }
        let th = self.theta;
        Ok(match self.family {
            // (1 − U, V) has the Frank copula with parameter −θ
            CopulaFamily::Frank => Copula { family: CopulaFamily::Frank, theta: -th }.cdf_unchecked(s, v),
            CopulaFamily::Amh => {
                let m = v * s * (one - th * (one - v)) / (one - th * s * (one - v));
                m.max((s + v - one).max(T::zero())).min(s.min(v))
            }
        })
    }

    /// c(u, v) = ∂²C/∂u∂v.
    pub fn pdf(&self, u: T, v: T) -> Result<T, CopulaError> {
        Self::check(u, v)?;
        Ok(self.ln_pdf(u, v).exp())
    }

    /// ln c(u, v) for (u, v) in the unit square; no range check.
    pub fn ln_pdf(&self, u: T, v: T) -> T {
        if self.is_independent() {
            return T::zero();
        }
        let one = T::one();
        match self.family {
            CopulaFamily::Frank => {
                // c(u, v; θ) = c(u, 1 − v; −θ), so only θ > 0 is evaluated
                let (th, v, vc) = if self.theta < T::zero() { (-self.theta, one - v, v) } else { (self.theta, v, one - v) };
                th.ln() + (-(-th).exp_m1()).ln() - th * (u + v) - T::two() * frank_ln_d(th, u, v, vc)
            }
            CopulaFamily::Amh => {
                let th = self.theta;
                let (cu, cv) = (one - u, one - v);
                let num = one + th * ((one + u) * (one + v) - T::lit(3.0)) + th * th * cu * cv;
                let den = one - th * cu * cv;
                num.ln() - T::lit(3.0) * den.ln()
            }
        }
    }

    /// Conditional distribution of V given U = u, i.e. ∂C/∂u.
    pub fn conditional_cdf(&self, u: T, v: T) -> Result<T, CopulaError> {
        Self::check(u, v)?;
        Ok(self.conditional_unchecked(u, v))
    }

    fn conditional_unchecked(&self, u: T, v: T) -> T {
        let one = T::one();
        if v == T::zero() {
            return T::zero();
        }
        if v == one {
            return one;
        }
        if self.is_independent() {
            return v;
        }
        let th = self.theta;
        let h = match self.family {
            CopulaFamily::Frank if th > T::zero() => {
                (-th * u + (-(-th * v).exp_m1()).ln() - frank_ln_d(th, u, v, one - v)).exp()
            }
            CopulaFamily::Frank => {
                let b_over_g = (-th * v).exp_m1() / (-th).exp_m1();
                let a = (-th * u).exp_m1();
                (-th * u).exp() * b_over_g / (one + a * b_over_g)
            }
            CopulaFamily::Amh => {
                let den = one - th * (one - u) * (one - v);
                v * (one - th * (one - v)) / (den * den)
            }
        };
        h.max(T::zero()).min(one)
    }

    /// The v with ∂C/∂u (u, v) = w, by bisection.
    pub fn inverse_conditional(&self, u: T, w: T) -> Result<T, CopulaError> {
        let fail = || CopulaError::InversionFailed {
            theta: self.theta.to_f64_lossless(),
            u: u.to_f64_lossless(),
            w: w.to_f64_lossless(),
        };
        if !in_unit(u) || !in_unit(w) {
            return Err(fail());
        }
        if self.is_independent() {
            return Ok(w);
        }
        let tol = T::lit(INVERSION_TOL).max(T::epsilon() * T::lit(4.0));
        let (mut lo, mut hi) = (T::zero(), T::one());
        while hi - lo > tol {
            let mid = T::half() * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let h = self.conditional_unchecked(u, mid);
            if h.is_nan() {
                return Err(fail());
            }
            if h < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(T::half() * (lo + hi))
    }

    /// Σ ln c(uᵢ, vᵢ).
    pub fn log_likelihood(&self, ps: &PseudoSample<T>) -> T {
        ps.u.iter().zip(&ps.v).map(|(&u, &v)| self.ln_pdf(u, v)).sum()
    }
}

// ln D for θ > 0, where D = (1 − e^{−θ}) − (1 − e^{−θu})(1 − e^{−θv})
//   = e^{−θu}(1 − e^{−θv}) + e^{−θv}(1 − e^{−θ(1−v)}),
// a sum of non-negative terms; `vc` is 1 − v.
fn frank_ln_d<T: Real>(th: T, u: T, v: T, vc: T) -> T {
    let t1 = -th * u + (-(-th * v).exp_m1()).ln();
    let t2 = -th * v + (-(-th * vc).exp_m1()).ln();
    let (hi, lo) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
    if hi == T::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Pairs (uᵢ, vᵢ) = (P(τᵢ), G(yᵢ)) under the fitted marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PseudoSample<T: Real> {
    u: Vec<T>,
    v: Vec<T>,
    /// How many coordinates were moved onto the clamp bounds.
    clamped: usize,
}

impl<T: Real> PseudoSample<T> {
    pub fn new(u: Vec<T>, v: Vec<T>) -> Result<Self, CopulaError> {
        if u.len() != v.len() {
            return Err(CopulaError::LengthMismatch { u: u.len(), v: v.len() });
        }
        let n = u.len();
        let lo = T::lit(PSEUDO_CLAMP);
        let hi = T::one() - lo;
        let mut clamped = 0;
        let mut clamp_all = |xs: Vec<T>, offset: usize| -> Result<Vec<T>, CopulaError> {
            xs.into_iter()
                .enumerate()
                .map(|(i, x)| {
                    if !in_unit(x) {
                        return Err(CopulaError::InvalidObservation { index: offset + i, value: x.to_f64_lossless() });
                    }
                    if x < lo || x > hi {
                        clamped += 1;
                    }
                    Ok(x.max(lo).min(hi))
                })
                .collect()
        };
        let u = clamp_all(u, 0)?;
        let v = clamp_all(v, n)?;
        Ok(Self { u, v, clamped })
    }

    /// Pseudo-observations of paired (τ, y) under fitted marginals. Values
    /// past the end of a bounded support map to 1.
    pub fn from_marginals(tau: &[T], y: &[T], ri: &RiModel<T>, gpd: &GpdModel<T>) -> Result<Self, CopulaError> {
        if tau.len() != y.len() {
            return Err(CopulaError::LengthMismatch { u: tau.len(), v: y.len() });
        }
        let prob = |x: T, end: T, cdf: &dyn Fn(T) -> Option<T>, index: usize| {
            if !(x >= T::zero()) || !x.is_finite() {
                return Err(CopulaError::InvalidObservation { index, value: x.to_f64_lossless() });
            }
            if x >= end {
                return Ok(T::one());
            }
            cdf(x).ok_or(CopulaError::InvalidObservation { index, value: x.to_f64_lossless() })
        };
        let ri_cdf = |t: T| ri.cdf(t).ok();
        let gpd_cdf = |t: T| gpd.cdf(t).ok();
        let u = tau
            .iter()
            .enumerate()
            .map(|(i, &t)| prob(t, ri.support_end(), &ri_cdf, i))
            .collect::<Result<Vec<_>, _>>()?;
        let v = y
            .iter()
            .enumerate()
            .map(|(i, &x)| prob(x, gpd.support_end(), &gpd_cdf, tau.len() + i))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(u, v)
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn clamped(&self) -> usize {
        self.clamped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaFitOptions {
    pub search: LineSearch,
    pub min_sample: usize,
}

impl Default for CopulaFitOptions {
    fn default() -> Self {
        Self { search: LineSearch::default(), min_sample: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit<T> {
    pub rmse: T,
    pub aic: T,
    /// The squared error was zero and `aic` holds the most negative finite
    /// value instead of −∞.
    pub aic_guarded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CopulaFit<T: Real> {
    #[serde(flatten)]
    pub copula: Copula<T>,
    #[serde(rename = "lnL")]
    pub loglik: T,
    #[serde(rename = "RMSE")]
    pub rmse: T,
    #[serde(rename = "AIC")]
    pub aic: T,
    pub n: usize,
    pub at_boundary: bool,
    pub aic_guarded: bool,
}

impl<T: Real> CopulaFit<T> {
    pub fn family(&self) -> CopulaFamily {
        self.copula.family
    }

    pub fn theta(&self) -> T {
        self.copula.theta
    }
}

fn check_sample<T: Real>(ps: &PseudoSample<T>, min: usize) -> Result<(), CopulaError> {
    let min = min.max(2);
    if ps.len() < min {
        return Err(CopulaError::SampleTooSmall { len: ps.len(), min });
    }
    if ps.u.iter().all(|&x| x == ps.u[0]) {
        return Err(CopulaError::Degenerate("u"));
    }
    if ps.v.iter().all(|&x| x == ps.v[0]) {
        return Err(CopulaError::Degenerate("v"));
    }
    Ok(())
}

/// Maximum-likelihood θ for one family.
pub fn fit_copula<T: Real>(
    ps: &PseudoSample<T>,
    family: CopulaFamily,
    opts: &CopulaFitOptions,
) -> Result<CopulaFit<T>, CopulaError> {
    check_sample(ps, opts.min_sample)?;
    let objective = |theta: T| Copula { family, theta }.log_likelihood(ps);
    let tol = T::lit(BOUNDARY_TOL);
    let best: ScalarOptimum<T> = match family {
        CopulaFamily::Frank => {
            let neg = maximize_scalar(objective, T::lit(-FRANK_MAX), T::lit(-FRANK_GAP), opts.search, tol);
            let pos = maximize_scalar(objective, T::lit(FRANK_GAP), T::lit(FRANK_MAX), opts.search, tol);
            if pos.value > neg.value {
                pos
            } else {
                neg
            }
        }
        CopulaFamily::Amh => maximize_scalar(objective, T::lit(AMH_LOWER), T::lit(AMH_UPPER), opts.search, tol),
    };
    let copula = Copula::new(family, best.x)?;
    let gof = goodness_of_fit(ps, &copula)?;
    if best.at_boundary {
        log::warn!("{family} copula: theta = {} on the search boundary", best.x);
    }
    Ok(CopulaFit {
        copula,
        loglik: copula.log_likelihood(ps),
        rmse: gof.rmse,
        aic: gof.aic,
        n: ps.len(),
        at_boundary: best.at_boundary,
        aic_guarded: gof.aic_guarded,
    })
}

struct Fenwick(Vec<usize>);

impl Fenwick {
    fn add(&mut self, pos: usize) {
        let mut i = pos;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    fn prefix(&self, pos: usize) -> usize {
        let mut i = pos;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

fn total_cmp<T: Real>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Empirical joint CDF at each sample point: (1/n) #{j : uⱼ ≤ uᵢ, vⱼ ≤ vᵢ}.
pub fn empirical_joint_cdf<T: Real>(u: &[T], v: &[T]) -> Vec<T> {
    let n = u.len().min(v.len());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| total_cmp(&u[i], &u[j]));
    let mut levels = v[..n].to_vec();
    levels.sort_by(total_cmp);
    levels.dedup();
    let rank = |x: T| levels.partition_point(|&w| w <= x);

    let mut tree = Fenwick(vec![0; levels.len() + 1]);
    let mut counts = vec![0usize; n];
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && u[order[end]] == u[order[k]] {
            end += 1;
        }
        for &i in &order[k..end] {
            tree.add(rank(v[i]));
        }
        for &i in &order[k..end] {
            counts[i] = tree.prefix(rank(v[i]));
        }
        k = end;
    }
    let nf = T::from_count(n);
    counts.into_iter().map(|c| T::from_count(c) / nf).collect()
}

/// RMSE between empirical and model joint CDFs (divisor n − 1) and
/// AIC = n ln(RMSE²) + 2 with one copula parameter.
pub fn goodness_of_fit<T: Real>(ps: &PseudoSample<T>, copula: &Copula<T>) -> Result<GoodnessOfFit<T>, CopulaError> {
    let n = ps.len();
    if n < 2 {
        return Err(CopulaError::SampleTooSmall { len: n, min: 2 });
    }
    let emp = empirical_joint_cdf(&ps.u, &ps.v);
    let sse: T = emp
        .iter()
        .zip(ps.u.iter().zip(&ps.v))
        .map(|(&fe, (&u, &v))| {
            let d = fe - copula.cdf_unchecked(u, v);
            d * d
        })
        .sum();
    let mse = sse / T::from_count(n - 1);
    let (aic, aic_guarded) = aic_from_mse(n, mse);
    if aic_guarded {
        log::warn!("{} copula: zero squared error, AIC reported as the most negative finite value", copula.family);
    }
    Ok(GoodnessOfFit { rmse: mse.sqrt(), aic, aic_guarded })
}

fn aic_from_mse<T: Real>(n: usize, mse: T) -> (T, bool) {
    if mse > T::zero() {
        (T::from_count(n) * mse.ln() + T::two(), false)
    } else {
        (T::min_value(), true)
    }
}

fn nan_last<T: Real>(a: T, b: T) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => total_cmp(&a, &b),
    }
}

/// The preferred fit: smallest AIC, then smallest RMSE, then Frank.
pub fn best_fit<T: Real>(fits: &[CopulaFit<T>]) -> Option<&CopulaFit<T>> {
    fits.iter().min_by(|a, b| {
        nan_last(a.aic, b.aic)
            .then_with(|| nan_last(a.rmse, b.rmse))
            .then_with(|| (a.family() != CopulaFamily::Frank).cmp(&(b.family() != CopulaFamily::Frank)))
    })
}

/// Fits of both families, in the order of [`CopulaFamily::ALL`].
pub fn fit_both<T: Real>(
    ps: &PseudoSample<T>,
    opts: &CopulaFitOptions,
) -> [Result<CopulaFit<T>, CopulaError>; 2] {
    CopulaFamily::ALL.map(|f| fit_copula(ps, f, opts))
}

/// Fits both families and keeps the one preferred by [`best_fit`].
pub fn select_copula<T: Real>(ps: &PseudoSample<T>, opts: &CopulaFitOptions) -> Result<CopulaFit<T>, CopulaError> {
    let [frank, amh] = fit_both(ps, opts);
    match (frank, amh) {
        (Err(f), Err(a)) => Err(CopulaError::BothFitsFailed { frank: f.to_string(), amh: a.to_string() }),
        (f, a) => {
            let fits: Vec<_> = [f, a].into_iter().filter_map(Result::ok).collect();
            Ok(*best_fit(&fits).expect("at least one fit"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, integrate_2d};

    fn copulas() -> Vec<Copula<f64>> {
        vec![
            Copula::new(CopulaFamily::Frank, -1.545).unwrap(),
            Copula::new(CopulaFamily::Frank, 5.0).unwrap(),
            Copula::new(CopulaFamily::Frank, -30.0).unwrap(),
            Copula::new(CopulaFamily::Frank, 30.0).unwrap(),
            Copula::new(CopulaFamily::Amh, -0.778).unwrap(),
            Copula::new(CopulaFamily::Amh, 0.6).unwrap(),
            Copula::new(CopulaFamily::Amh, -1.0).unwrap(),
        ]
    }

    #[test]
    fn independence_values() {
        let amh = Copula::new(CopulaFamily::Amh, 0.0_f64).unwrap();
        assert!((amh.cdf(0.3, 0.7).unwrap() - 0.21).abs() < 1e-15);
        assert_eq!(amh.pdf(0.2, 0.9).unwrap(), 1.0);
        let frank = Copula::new(CopulaFamily::Frank, 1e-7_f64).unwrap();
        assert!((frank.cdf(0.3, 0.7).unwrap() - 0.21).abs() < 1e-6);
        let frank = Copula::new(CopulaFamily::Frank, -1e-7_f64).unwrap();
        assert!((frank.cdf(0.3, 0.7).unwrap() - 0.21).abs() < 1e-6);
    }

    #[test]
    fn boundary_identities_are_exact() {
        let us = [0.0, 1e-9, 0.013, 0.3, 0.5, 0.77, 0.999, 1.0];
        for c in copulas() {
            for &u in &us {
                assert_eq!(c.cdf(u, 0.0).unwrap(), 0.0);
                assert_eq!(c.cdf(0.0, u).unwrap(), 0.0);
                assert_eq!(c.cdf(u, 1.0).unwrap(), u);
                assert_eq!(c.cdf(1.0, u).unwrap(), u);
            }
        }
    }

    #[test]
    fn upper_u_mass_matches_cdf() {
        for c in copulas() {
            for &(s, v) in &[(0.3, 0.7), (0.01, 0.5), (0.9, 0.05), (1.0, 0.4), (0.0, 0.4), (0.5, 1.0)] {
                let direct = v - c.cdf(1.0 - s, v).unwrap();
                assert!((c.upper_u_mass(s, v).unwrap() - direct).abs() < 1e-14, "{c:?} ({s},{v})");
            }
        }
        // far tail, where the direct difference has no correct digits left
        let c = Copula::new(CopulaFamily::Frank, -1.5_f64).unwrap();
        let s = 1e-13;
        let q = integrate_2d(|a, b| c.ln_pdf(1.0 - a, b).exp(), 0.0, s, |_| 0.0, |_| 0.3, 1e-30, 1e-12);
        assert!((c.upper_u_mass(s, 0.3).unwrap() / q.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn theta_ranges() {
        assert!(Copula::new(CopulaFamily::Amh, 1.0_f64).is_err());
        assert!(Copula::new(CopulaFamily::Amh, -1.0001_f64).is_err());
        assert!(Copula::new(CopulaFamily::Frank, f64::NAN).is_err());
        let c = Copula::new(CopulaFamily::Frank, 2.0_f64).unwrap();
        assert!(c.cdf(1.2, 0.5).is_err());
        assert!(c.pdf(0.5, -0.1).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        for c in copulas() {
            let q = integrate_2d(|u, v| c.ln_pdf(u, v).exp(), 0.0, 1.0, |_| 0.0, |_| 1.0, 1e-9, 1e-9);
            assert!((q.value - 1.0).abs() < 1e-5, "{c:?}: {}", q.value);
        }
    }

    #[test]
    fn cdf_is_integral_of_density() {
        let pts = [(0.3, 0.7), (0.95, 0.97), (0.999, 0.998), (0.02, 0.01), (0.6, 0.45)];
        for c in copulas() {
            for &(u, v) in &pts {
                let q = integrate_2d(|s, t| c.ln_pdf(s, t).exp(), 0.0, u, |_| 0.0, |_| v, 1e-12, 1e-12);
                assert!((q.value - c.cdf(u, v).unwrap()).abs() < 1e-9, "{c:?} ({u},{v})");
            }
        }
    }

    #[test]
    fn density_is_mixed_partial_of_cdf() {
        let h = 1e-4;
        let pts = [(0.5, 0.5), (0.1, 0.8), (0.35, 0.2), (0.9, 0.93), (0.62, 0.07)];
        for c in copulas() {
            for &(u, v) in &pts {
                let f = |a: f64, b: f64| c.cdf(a, b).unwrap();
                let fd = (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4.0 * h * h);
                let pdf = c.pdf(u, v).unwrap();
                assert!((fd - pdf).abs() < 1e-4 * pdf.max(1.0), "{c:?} ({u},{v}): {fd} vs {pdf}");
            }
        }
    }

    #[test]
    fn conditional_is_partial_in_u() {
        let h = 1e-6;
        for c in copulas() {
            for &(u, v) in &[(0.5, 0.5), (0.2, 0.9), (0.85, 0.15), (0.03, 0.4)] {
                let fd = (c.cdf(u + h, v).unwrap() - c.cdf(u - h, v).unwrap()) / (2.0 * h);
                assert!((fd - c.conditional_cdf(u, v).unwrap()).abs() < 1e-7, "{c:?}");
            }
        }
    }

    #[test]
    fn conditional_integrates_density() {
        let c = Copula::new(CopulaFamily::Frank, -1.5_f64).unwrap();
        let q = integrate(|s| c.pdf(0.3, s).unwrap(), 0.0, 0.6, 1e-13, 1e-13);
        assert!((q.value - c.conditional_cdf(0.3, 0.6).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn inverse_conditional_round_trip() {
        for c in copulas() {
            for &(u, w) in &[(0.5, 0.5), (0.01, 0.99), (0.97, 0.02), (0.4, 0.7)] {
                let v = c.inverse_conditional(u, w).unwrap();
                assert!((c.conditional_cdf(u, v).unwrap() - w).abs() < 1e-8, "{c:?}");
            }
        }
        let c = Copula::new(CopulaFamily::Amh, 0.3_f64).unwrap();
        assert!(c.inverse_conditional(0.5, 1.5).is_err());
    }

    #[test]
    fn empirical_cdf_matches_brute_force() {
        let u = [0.3, 0.1, 0.3, 0.9, 0.5, 0.1, 0.7, 0.2];
        let v = [0.4, 0.4, 0.2, 0.1, 0.8, 0.9, 0.4, 0.6];
        let fast = empirical_joint_cdf(&u, &v);
        for i in 0..u.len() {
            let count = (0..u.len()).filter(|&j| u[j] <= u[i] && v[j] <= v[i]).count();
            assert_eq!(fast[i], count as f64 / u.len() as f64);
        }
    }

    #[test]
    fn zero_error_guards_aic() {
        let (aic, guarded) = aic_from_mse(50, 0.0_f64);
        assert!(guarded && aic == f64::MIN);
        let (aic, guarded) = aic_from_mse(50, 1e-4_f64);
        assert!(!guarded && (aic - (50.0 * 1e-4_f64.ln() + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn pseudo_sample_clamps() {
        let ps = PseudoSample::new(vec![0.0_f64, 0.5, 1.0], vec![0.2, 1.0, 0.3]).unwrap();
        assert_eq!(ps.clamped(), 3);
        assert!(ps.u().iter().chain(ps.v()).all(|&x| x > 0.0 && x < 1.0));
        assert!(PseudoSample::new(vec![0.1_f64], vec![1.1]).is_err());
        assert!(PseudoSample::new(vec![0.1_f64], vec![]).is_err());
    }

    #[test]
    fn fit_rejects_degenerate_samples() {
        let ps = PseudoSample::new(vec![0.5_f64; 20], (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect()).unwrap();
        assert_eq!(fit_copula(&ps, CopulaFamily::Frank, &CopulaFitOptions::default()), Err(CopulaError::Degenerate("u")));
        let ps = PseudoSample::new(vec![0.5_f64; 3], vec![0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(
            fit_copula(&ps, CopulaFamily::Amh, &CopulaFitOptions::default()),
            Err(CopulaError::SampleTooSmall { .. })
        ));
    }

    fn fit_with(family: CopulaFamily, aic: f64, rmse: f64) -> CopulaFit<f64> {
        CopulaFit {
            copula: Copula::independence(family),
            loglik: 0.0,
            rmse,
            aic,
            n: 10,
            at_boundary: false,
            aic_guarded: false,
        }
    }

    #[test]
    fn selection_order() {
        let f = fit_with(CopulaFamily::Frank, -10.0, 0.1);
        let a = fit_with(CopulaFamily::Amh, -11.0, 0.2);
        assert_eq!(best_fit(&[f, a]).unwrap().family(), CopulaFamily::Amh);
        let a = fit_with(CopulaFamily::Amh, -10.0, 0.05);
        assert_eq!(best_fit(&[f, a]).unwrap().family(), CopulaFamily::Amh);
        let a = fit_with(CopulaFamily::Amh, -10.0, 0.1);
        assert_eq!(best_fit(&[a, f]).unwrap().family(), CopulaFamily::Frank);
        let a = fit_with(CopulaFamily::Amh, f64::NAN, 0.1);
        assert_eq!(best_fit(&[a, f]).unwrap().family(), CopulaFamily::Frank);
    }

    #[test]
    fn json_round_trip() {
        let fit = fit_with(CopulaFamily::Amh, -3179.4, 0.0123);
        let s = serde_json::to_string(&fit).unwrap();
        assert!(s.contains("\"family\":\"amh\"") && s.contains("\"AIC\""));
        let back: CopulaFit<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, fit);
        assert!(serde_json::from_str::<Copula<f64>>(r#"{"family":"amh","theta":1.5}"#).is_err());
    }

    #[test]
    fn single_precision() {
        let c = Copula::new(CopulaFamily::Frank, -50.0_f32).unwrap();
        let x = c.cdf(0.4, 0.7).unwrap();
        assert!(x.is_finite() && (0.0..=0.4).contains(&x));
        assert!(c.ln_pdf(0.4, 0.7).is_finite());
        assert!(c.conditional_cdf(0.99, 0.5).unwrap().is_finite());
    }
}
