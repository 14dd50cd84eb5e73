//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Used to check closed-form CDFs and hazards against direct integration of
//! the densities.

use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SUBDIVISIONS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    /// Sum of the local Kronrod−Gauss error estimates.
    pub error: T,
}

// 15-point Kronrod rule with the QUADPACK error estimate, which rescales
// |K − G| against the variation of f on the interval.
fn kronrod<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let center = T::half() * (a + b);
    let half = T::half() * (b - a);
    let fc = f(center);
    let mut lo = [T::zero(); 7];
    let mut hi = [T::zero(); 7];
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    let mut abs_sum = fc.abs() * T::lit(WGK[7]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        lo[j] = f(center - dx);
        hi[j] = f(center + dx);
        let s = lo[j] + hi[j];
        kron = kron + s * T::lit(WGK[j]);
        abs_sum = abs_sum + (lo[j].abs() + hi[j].abs()) * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * T::lit(WG[j / 2]);
        }
    }
    let mean = kron * T::half();
    let mut asc = (fc - mean).abs() * T::lit(WGK[7]);
    for j in 0..7 {
        asc = asc + ((lo[j] - mean).abs() + (hi[j] - mean).abs()) * T::lit(WGK[j]);
    }
    let half_abs = half.abs();
    let asc = asc * half_abs;
    let abs_sum = abs_sum * half_abs;
    let mut err = ((kron - gauss) * half).abs();
    if asc > T::zero() && err > T::zero() {
        err = asc * (T::lit(200.0) * err / asc).powf(T::lit(1.5)).min(T::one());
    }
    // intervals already at the rounding level are reported with error 0 so the
    // driver stops refining them
    if err <= T::lit(50.0) * T::epsilon() * abs_sum {
        err = T::zero();
    }
    (kron * half, err)
}

/// ∫ₐᵇ f(x) dx to the given absolute or relative tolerance.
///
/// Globally adaptive: the interval with the largest error estimate is
/// bisected until the summed estimate meets the tolerance or the
/// subdivision budget is spent.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, abs_tol: T, rel_tol: T) -> Quadrature<T> {
    if a == b {
        return Quadrature { value: T::zero(), error: T::zero() };
    }
    if a > b {
        let q = integrate(f, b, a, abs_tol, rel_tol);
        return Quadrature { value: -q.value, error: q.error };
    }
    let (v0, e0) = kronrod(&mut f, a, b);
    let mut parts = vec![(a, b, v0, e0)];
    let mut value = v0;
    let mut error = e0;
    while parts.len() < MAX_SUBDIVISIONS && error > abs_tol.max(rel_tol * value.abs()) {
        let (worst, worst_err) = parts
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        if !(worst_err > T::zero()) {
            break;
        }
        let (lo, hi, pv, pe) = parts[worst];
        let mid = T::half() * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (lv, le) = kronrod(&mut f, lo, mid);
        let (rv, re) = kronrod(&mut f, mid, hi);
        value = value - pv + lv + rv;
        error = error - pe + le + re;
        parts[worst] = (lo, mid, lv, le);
        parts.push((mid, hi, rv, re));
    }
    // re-sum to shed the drift of the running updates
    let value = parts.iter().map(|p| p.2).sum();
    let error = parts.iter().map(|p| p.3).sum();
    Quadrature { value, error }
}

/// ∫ₐ^∞ f(x) dx via the substitution x = a + s/(1 − s).
pub fn integrate_to_infinity<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    abs_tol: T,
    rel_tol: T,
) -> Quadrature<T> {
    let one = T::one();
    integrate(
        |s: T| {
            if s >= one {
                return T::zero();
            }
            let w = one - s;
            let v = f(a + s / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                T::zero()
            }
        },
        T::zero(),
        one,
        abs_tol,
        rel_tol,
    )
}

/// Iterated integral ∫ₐᵇ ∫_c(x)^d(x) f(x, y) dy dx.
pub fn integrate_2d<T, F, L, U>(
    mut f: F,
    a: T,
    b: T,
    lower: L,
    upper: U,
    abs_tol: T,
    rel_tol: T,
) -> Quadrature<T>
where
    T: Real,
    F: FnMut(T, T) -> T,
    L: Fn(T) -> T,
    U: Fn(T) -> T,
{
    let inner_tol = abs_tol * T::lit(1e-2);
    integrate(
        |x: T| integrate(|y: T| f(x, y), lower(x), upper(x), inner_tol, rel_tol).value,
        a,
        b,
        abs_tol,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14);
        assert!((q.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_tail() {
        let q = integrate_to_infinity(|x: f64| (-x * x / 2.0).exp(), 0.0, 1e-13, 1e-13);
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        assert!((q.value - exact).abs() < 1e-11);
    }

    #[test]
    fn integrable_singularity() {
        let q = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12);
        assert!((q.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let q = integrate(|x: f64| x.exp(), 1.0, 0.0, 1e-13, 1e-13);
        assert!((q.value + (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn triangle_area() {
        let q = integrate_2d(|_, _| 1.0_f64, 0.0, 1.0, |_| 0.0, |x| x, 1e-12, 1e-12);
        assert!((q.value - 0.5).abs() < 1e-12);
    }
}
