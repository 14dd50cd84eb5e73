//! Test-side numerics kept separate from the library's own quadrature.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre rule over the given panel edges.
pub struct Rule {
    nodes: Vec<(f64, f64)>,
}

impl Rule {
    pub fn new(order: usize) -> Self {
        Self { nodes: gauss_legendre(order) }
    }

    /// Quadrature points (x, w) on [a, b] split into `panels` equal parts.
    pub fn points(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let edges: Vec<f64> = (0..=panels).map(|k| a + (b - a) * k as f64 / panels as f64).collect();
        self.points_on(&edges)
    }

    /// Points on [0, b] with panels halving in width towards 0, for
    /// integrable power singularities at the origin.
    pub fn graded_points(&self, b: f64, levels: usize) -> Vec<(f64, f64)> {
        let mut edges: Vec<f64> = (0..=levels).rev().map(|k| b * 0.5_f64.powi(k as i32)).collect();
        edges.insert(0, 0.0);
        self.points_on(&edges)
    }

    pub fn points_on(&self, edges: &[f64]) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(edges.len() * self.nodes.len());
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
            pts.extend(self.nodes.iter().map(|&(x, wt)| (mid + half * x, half * wt)));
        }
        pts
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        self.points(a, b, panels).iter().map(|&(x, w)| w * f(x)).sum()
    }
}

/// GPD survival, density and CDF written out directly.
pub fn gpd_cdf(xi: f64, phi: f64, y: f64) -> f64 {
    if xi == 0.0 {
        1.0 - (-y / phi).exp()
    } else {
        let z = 1.0 + xi * y / phi;
        if z <= 0.0 {
            1.0
        } else {
            1.0 - z.powf(-1.0 / xi)
        }
    }
}

pub fn gpd_pdf(xi: f64, phi: f64, y: f64) -> f64 {
    if xi == 0.0 {
        (-y / phi).exp() / phi
    } else {
        let z = 1.0 + xi * y / phi;
        if z <= 0.0 {
            0.0
        } else {
            z.powf(-1.0 / xi - 1.0) / phi
        }
    }
}
