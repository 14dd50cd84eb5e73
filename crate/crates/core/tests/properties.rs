mod common;

use proptest::prelude::*;
use tailhazard::backtest::{confusion, default_qp_grid};
use tailhazard::copula::{Copula, CopulaFamily};
use tailhazard::events::{extract_events, ExtremeSpec, Side};
use tailhazard::hazard::{hazard_joint, hazard_ri, HazardModel, HazardQuery};
use tailhazard::marginals::{GpdModel, RiFamily, RiModel};

fn family() -> impl Strategy<Value = CopulaFamily> {
    prop_oneof![Just(CopulaFamily::Frank), Just(CopulaFamily::Amh)]
}

fn copula() -> impl Strategy<Value = Copula<f64>> {
    family().prop_flat_map(|f| {
        let range = match f {
            CopulaFamily::Frank => -20.0..20.0,
            CopulaFamily::Amh => -1.0..0.99,
        };
        range.prop_map(move |theta| Copula::new(f, theta).unwrap())
    })
}

fn ri_model() -> impl Strategy<Value = RiModel<f64>> {
    (0usize..3, 0.05..0.999_f64, 2.0..30.0_f64).prop_map(|(k, s, mean)| {
        let (family, shape) = match k {
            0 => (RiFamily::StretchedExponential, s),
            1 => (RiFamily::QExponential, 0.05 + s * 1.4),
            _ => (RiFamily::Weibull, s),
        };
        RiModel::new(family, shape, mean).unwrap()
    })
}

fn gpd_model() -> impl Strategy<Value = GpdModel<f64>> {
    (-0.4..0.8_f64, 0.001..0.05_f64).prop_map(|(xi, phi)| GpdModel::new(xi, phi).unwrap())
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0_f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn copula_is_two_increasing(c in copula(), a in unit(), b in unit(), x in unit(), y in unit()) {
        let (u1, u2) = (a.min(b), a.max(b));
        let (v1, v2) = (x.min(y), x.max(y));
        let vol = c.cdf(u2, v2).unwrap() - c.cdf(u1, v2).unwrap() - c.cdf(u2, v1).unwrap() + c.cdf(u1, v1).unwrap();
        prop_assert!(vol >= -1e-12, "{c:?}: volume {vol}");
    }

    #[test]
    fn copula_within_frechet_bounds(c in copula(), u in unit(), v in unit()) {
        let value = c.cdf(u, v).unwrap();
        prop_assert!(value >= (u + v - 1.0).max(0.0) - 1e-15);
        prop_assert!(value <= u.min(v) + 1e-15);
        prop_assert_eq!(c.cdf(u, 1.0).unwrap(), u);
        prop_assert_eq!(c.cdf(0.0, v).unwrap(), 0.0);
    }

    #[test]
    fn copula_density_positive_and_conditional_is_a_cdf(c in copula(), u in 0.001..0.999_f64, v in 0.001..0.999_f64) {
        prop_assert!(c.pdf(u, v).unwrap() > 0.0);
        let h = c.conditional_cdf(u, v).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        let h2 = c.conditional_cdf(u, (v + 0.001).min(1.0)).unwrap();
        prop_assert!(h2 >= h - 1e-12);
    }

    #[test]
    fn inverse_conditional_round_trip(c in copula(), u in 0.01..0.99_f64, w in 0.01..0.99_f64) {
        let v = c.inverse_conditional(u, w).unwrap();
        prop_assert!((c.conditional_cdf(u, v).unwrap() - w).abs() < 1e-8);
    }

    #[test]
    fn ri_quantile_round_trip(m in ri_model(), p in 0.001..0.999_f64) {
        let tau = m.quantile(p).unwrap();
        prop_assert!((m.cdf(tau).unwrap() - p).abs() < 1e-8, "{m:?} p={p} tau={tau}");
        prop_assert!((m.cdf(tau).unwrap() + m.sf(tau).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gpd_quantile_round_trip(m in gpd_model(), p in 0.001..0.999_f64) {
        let y = m.quantile(p).unwrap();
        prop_assert!((m.cdf(y).unwrap() - p).abs() < 1e-8);
        prop_assert!((common::gpd_cdf(m.xi, m.phi, y) - p).abs() < 1e-8);
    }

    #[test]
    fn ri_cdf_is_monotone(m in ri_model(), a in 0.0..100.0_f64, b in 0.0..100.0_f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        let (fa, fb) = (m.cdf(lo).unwrap(), m.cdf(hi).unwrap());
        prop_assert!((0.0..=1.0).contains(&fa) && fb >= fa);
    }

    #[test]
    fn hazards_are_probabilities_monotone_in_horizon(
        ri in ri_model(), gpd in gpd_model(), c in copula(),
        t in 0.0..50.0_f64, dt in 0.1..10.0_f64, extra in 0.1..10.0_f64, p in 0.01..0.99_f64,
    ) {
        let m = HazardModel::new(ri, gpd, c);
        let y = gpd.quantile(p).unwrap();
        let short = m.evaluate(&HazardQuery::new(t, dt, y).unwrap()).unwrap();
        let long = m.evaluate(&HazardQuery::new(t, dt + extra, y).unwrap()).unwrap();
        for w in [short.w.value, short.wy.value, long.w.value, long.wy.value] {
            prop_assert!((0.0..=1.0).contains(&w));
        }
        prop_assert!(long.w.value >= short.w.value - 1e-12);
        prop_assert!(long.wy.value >= short.wy.value - 1e-12);
    }

    #[test]
    fn survival_composes_over_consecutive_horizons(
        ri in ri_model(), gpd in gpd_model(), c in copula(),
        t in 0.0..20.0_f64, d1 in 0.1..5.0_f64, d2 in 0.1..5.0_f64, p in 0.05..0.95_f64,
    ) {
        let m = HazardModel::new(ri, gpd, c);
        let y = gpd.quantile(p).unwrap();
        let q = |t: f64, dt: f64| HazardQuery::new(t, dt, y).unwrap();
        let whole = hazard_ri(&ri, &q(t, d1 + d2)).unwrap();
        let first = hazard_ri(&ri, &q(t, d1)).unwrap();
        let second = hazard_ri(&ri, &q(t + d1, d2)).unwrap();
        if whole.warning.is_none() && second.warning.is_none() {
            let composed = 1.0 - (1.0 - first.value) * (1.0 - second.value);
            prop_assert!((whole.value - composed).abs() < 1e-9, "{} vs {composed}", whole.value);
        }
        let whole = hazard_joint(&m, &q(t, d1 + d2)).unwrap();
        let first = hazard_joint(&m, &q(t, d1)).unwrap();
        let second = hazard_joint(&m, &q(t + d1, d2)).unwrap();
        if whole.warning.is_none() && second.warning.is_none() {
            let composed = 1.0 - (1.0 - first.value) * (1.0 - second.value);
            prop_assert!((whole.value - composed).abs() < 1e-8, "{} vs {composed}", whole.value);
        }
    }

    #[test]
    fn negative_dependence_raises_hazard_after_large_sizes(
        ri in ri_model(), gpd in gpd_model(), f in family(), strength in 0.05..1.0_f64,
        t in 0.5..30.0_f64, p1 in 0.05..0.95_f64, p2 in 0.05..0.95_f64,
    ) {
        let theta = match f { CopulaFamily::Frank => -8.0 * strength, CopulaFamily::Amh => -strength };
        let m = HazardModel::new(ri, gpd, Copula::new(f, theta).unwrap());
        let (small, large) = (gpd.quantile(p1.min(p2)).unwrap(), gpd.quantile(p1.max(p2)).unwrap());
        let w_small = hazard_joint(&m, &HazardQuery::new(t, 1.0, small).unwrap()).unwrap().value;
        let w_large = hazard_joint(&m, &HazardQuery::new(t, 1.0, large).unwrap()).unwrap().value;
        prop_assert!(w_large >= w_small - 1e-12, "{w_large} < {w_small}");
    }

    #[test]
    fn roc_counts_move_together(h in prop::collection::vec(0.0..1.0_f64, 20..200), seed in 0u64..1000) {
        let truth: Vec<bool> = h.iter().enumerate().map(|(i, _)| (i as u64 * 7 + seed).is_multiple_of(5)).collect();
        let grid = default_qp_grid(&h);
        let mut prev: Option<(f64, f64)> = None;
        for &qp in grid.iter().rev() {
            let c = confusion(&h, &truth, qp).unwrap();
            prop_assert_eq!(c.total(), h.len());
            let cur = (c.false_alarm_rate::<f64>(), c.detection_rate::<f64>());
            if let Some((a, d)) = prev {
                prop_assert!(cur.0 >= a && cur.1 >= d);
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn extraction_matches_brute_force(r in prop::collection::vec(-0.1..0.1_f64, 30..300), q in 0.6..0.97_f64) {
        let spec = ExtremeSpec::new(q, Side::Positive).unwrap();
        let thr = spec.threshold(&r).unwrap();
        let expected: Vec<usize> = (0..r.len()).filter(|&i| r[i] > thr).collect();
        match extract_events(&r, &spec, thr) {
            Ok(ev) => {
                prop_assert_eq!(ev.indices(), &expected[..]);
                prop_assert_eq!(ev.tau().iter().sum::<usize>(), expected.last().unwrap() - expected[0]);
                for (&i, &y) in ev.indices().iter().zip(ev.y()) {
                    prop_assert_eq!(y, r[i] - thr);
                }
            }
            Err(_) => prop_assert!(expected.len() < 2),
        }
    }
}
