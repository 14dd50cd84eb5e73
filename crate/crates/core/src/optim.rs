//! Derivative-free maximizers used by the likelihood fits.
//!
//! One-parameter likelihoods are maximized either by a coarse scan followed by
//! golden-section refinement, or by an exhaustive grid with a fixed step.
//! Two-parameter problems use Nelder–Mead.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Number of evenly spaced probes used to bracket the maximum before the
/// golden-section refinement.
pub const DEFAULT_COARSE_POINTS: usize = 400;

/// Grid resolution of the exhaustive search, in points per unit (step 1e-6).
pub const EXACT_GRID_STEPS_PER_UNIT: u64 = 1_000_000;

/// How a bounded one-dimensional maximum is located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearch {
    /// Coarse scan with `coarse_points` probes, then golden-section search in
    /// the bracket around the best probe.
    Golden { coarse_points: usize },
    /// Every point `k / steps_per_unit` inside the bounds.
    Grid { steps_per_unit: u64 },
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch::Golden { coarse_points: DEFAULT_COARSE_POINTS }
    }
}

impl LineSearch {
    pub fn exact_grid() -> Self {
        LineSearch::Grid { steps_per_unit: EXACT_GRID_STEPS_PER_UNIT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarOptimum<T> {
    pub x: T,
    pub value: T,
    /// The maximizer sits within `boundary_tol` of either bound.
    pub at_boundary: bool,
}

#[inline]
fn score<T: Real>(v: T) -> T {
    if v.is_nan() {
        T::neg_infinity()
    } else {
        v
    }
}

/// Maximizes `f` over `[lo, hi]`.
pub fn maximize_scalar<T, F>(f: F, lo: T, hi: T, search: LineSearch, boundary_tol: T) -> ScalarOptimum<T>
where
    T: Real,
    F: Fn(T) -> T + Sync,
{
    assert!(lo < hi, "empty search interval");
    let (x, value) = match search {
        LineSearch::Golden { coarse_points } => bracketed_golden(&f, lo, hi, coarse_points.max(3)),
        LineSearch::Grid { steps_per_unit } => grid_argmax(&f, lo, hi, steps_per_unit),
    };
    let at_boundary = (x - lo).abs() <= boundary_tol || (hi - x).abs() <= boundary_tol;
    ScalarOptimum { x, value, at_boundary }
}

fn bracketed_golden<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T, points: usize) -> (T, T) {
    let span = hi - lo;
    let last = points - 1;
    let at = |i: usize| {
        if i == last {
            hi
        } else {
            lo + span * T::from_count(i) / T::from_count(last)
        }
    };
    let mut best_i = 0;
    let mut best_v = T::neg_infinity();
    for i in 0..points {
        let v = score(f(at(i)));
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = at(best_i.saturating_sub(1));
    let b = at((best_i + 1).min(last));
    let (gx, gv) = golden_section_max(f, a, b);
    if gv >= best_v {
        (gx, gv)
    } else {
        (at(best_i), best_v)
    }
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<T: Real, F: Fn(T) -> T>(f: &F, mut a: T, mut b: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = score(f(c));
    let mut fd = score(f(d));
    for _ in 0..200 {
        let tol = T::lit(1e-11) * (T::one() + c.abs().max(d.abs()));
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = score(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = score(f(d));
        }
    }
    // Endpoints take part so a monotone objective converges onto the bound.
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [a, b] {
        let v = score(f(x));
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Exhaustive search over the grid points `k / steps_per_unit` in `[lo, hi]`.
/// Ties resolve to the smallest abscissa so the result is deterministic.
pub fn grid_argmax<T, F>(f: &F, lo: T, hi: T, steps_per_unit: u64) -> (T, T)
where
    T: Real,
    F: Fn(T) -> T + Sync,
{
    let spu = steps_per_unit as f64;
    let k_lo = (lo.to_f64_lossless() * spu).ceil() as i64;
    let k_hi = (hi.to_f64_lossless() * spu).floor() as i64;
    assert!(k_lo <= k_hi, "grid has no points inside the bounds");
    let denom = T::lit(spu);
    let point = |k: i64| T::lit(k as f64) / denom;

    const CHUNK: i64 = 4096;
    let chunks = (k_hi - k_lo) / CHUNK + 1;
    let (k, v) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = k_lo + c * CHUNK;
            let end = (start + CHUNK - 1).min(k_hi);
            let mut best = (start, T::neg_infinity());
            for k in start..=end {
                let v = score(f(point(k)));
                if v > best.1 {
                    best = (k, v);
                }
            }
            best
        })
        .reduce(
            || (i64::MAX, T::neg_infinity()),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    (point(k), v)
}

/// Settings for [`nelder_mead_max`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions<T> {
    pub max_iter: usize,
    /// Stop when the spread of simplex values is below `f_tol · (1 + |f_best|)`
    /// and the simplex diameter is below `x_tol`.
    pub f_tol: T,
    pub x_tol: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 5_000,
            f_tol: T::lit(1e-13),
            x_tol: T::lit(1e-10),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadResult<T> {
    pub x: [T; 2],
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `f` over the plane with a Nelder–Mead simplex started at `start`
/// with edge lengths `step`.
pub fn nelder_mead_max<T: Real, F: Fn([T; 2]) -> T>(
    f: F,
    start: [T; 2],
    step: [T; 2],
    opts: NelderMeadOptions<T>,
) -> NelderMeadResult<T> {
    // Minimizes the negated objective.
    let cost = |p: [T; 2]| -score(f(p));
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut vals = simplex.map(cost);
    let half = T::half();
    let two = T::two();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        // sort ascending by cost
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);

        let spread = (vals[2] - vals[0]).abs();
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|p| (p[0] - simplex[0][0]).abs().max((p[1] - simplex[0][1]).abs()))
            .fold(T::zero(), T::max);
        if vals[0].is_finite()
            && spread <= opts.f_tol * (T::one() + vals[0].abs())
            && diameter <= opts.x_tol
        {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid = [
            half * (simplex[0][0] + simplex[1][0]),
            half * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: T| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-T::one());
        let fr = cost(reflected);
        if fr < vals[0] {
            let expanded = along(-two);
            let fe = cost(expanded);
            if fe < fr {
                simplex[2] = expanded;
                vals[2] = fe;
            } else {
                simplex[2] = reflected;
                vals[2] = fr;
            }
            continue;
        }
        if fr < vals[1] {
            simplex[2] = reflected;
            vals[2] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[2] {
            let p = along(-half);
            (p, cost(p))
        } else {
            let p = along(half);
            (p, cost(p))
        };
        if fc < vals[2].min(fr) {
            simplex[2] = contracted;
            vals[2] = fc;
            continue;
        }
        for i in 1..3 {
            simplex[i] = [
                simplex[0][0] + half * (simplex[i][0] - simplex[0][0]),
                simplex[0][1] + half * (simplex[i][1] - simplex[0][1]),
            ];
            vals[i] = cost(simplex[i]);
        }
    }

    let best = (0..3)
        .min_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    NelderMeadResult {
        x: simplex[best],
        value: -vals[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_max() {
        let f = |x: f64| -(x - 0.3141).powi(2);
        let opt = maximize_scalar(f, 0.0, 1.0, LineSearch::default(), 1e-6);
        assert!((opt.x - 0.3141).abs() < 1e-9);
        assert!(!opt.at_boundary);
    }

    #[test]
    fn golden_converges_to_bound_for_monotone_objective() {
        let opt = maximize_scalar(|x: f64| x, 1e-6, 1.0 - 1e-6, LineSearch::default(), 1e-6);
        assert!((opt.x - (1.0 - 1e-6)).abs() < 1e-9);
        assert!(opt.at_boundary);
    }

    #[test]
    fn grid_and_golden_agree() {
        let f = |x: f64| (x * 7.0).sin() - x * x;
        let g = maximize_scalar(f, 0.0, 1.0, LineSearch::default(), 1e-6);
        let e = maximize_scalar(f, 1e-6, 1.0 - 1e-6, LineSearch::Grid { steps_per_unit: 1_000_000 }, 1e-6);
        assert!((g.x - e.x).abs() <= 1e-6);
    }

    #[test]
    fn grid_handles_negative_range_and_nan() {
        let f = |x: f64| if x > 0.5 { f64::NAN } else { -(x + 0.25).powi(2) };
        let (x, _) = grid_argmax(&f, -1.0, 1.0, 1000);
        assert!((x + 0.25).abs() < 1e-12);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |p: [f64; 2]| -((1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2));
        let r = nelder_mead_max(f, [-1.2, 1.0], [0.5, 0.5], NelderMeadOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }
}
