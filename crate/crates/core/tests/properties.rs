use bdisqmc::bdis::{alpha_star_large_q, alpha_star_moderate, power_schedule, transport, weight, weight_cdf};
use bdisqmc::dists::Density;
use bdisqmc::estimator::{estimate, fit_rate, replicate_rmse, FnIntegrand};
use bdisqmc::net::{mc_points, PointSet};
use bdisqmc::{BdisTransform, BetaGaussian};
use num_rational::Ratio;
use proptest::prelude::*;
use statrs::function::gamma::gamma_ur;

fn unit() -> impl Strategy<Value = f64> {
    (1e-6f64..1.0 - 1e-6).prop_filter("interior", |u| *u > 0.0 && *u < 1.0)
}

proptest! {
    #[test]
    fn weight_is_symmetric_and_bounded(u in unit(), theta in 0.0f64..=0.5, p in 0.5f64..3.0) {
        let w = weight(u, theta, p);
        prop_assert!((0.0..=2.0).contains(&w));
        prop_assert!((w - weight(1.0 - u, theta, p)).abs() <= 1e-12);
    }

    #[test]
    fn weight_cdf_is_antisymmetric(u in unit(), theta in 0.0f64..=0.5, p in 0.5f64..3.0) {
        let lo = weight_cdf(u, theta, p).unwrap();
        let hi = weight_cdf(1.0 - u, theta, p).unwrap();
        prop_assert!((lo + hi - 1.0).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&lo));
    }

    #[test]
    fn transport_pushes_weight_cdf(u in 1e-3f64..0.999, theta in 0.0f64..=0.5, p in 1.0f64..2.0, beta in 0.7f64..3.0) {
        let d = BetaGaussian::new(beta).unwrap();
        let x = transport(u, theta, p, &d).unwrap();
        prop_assert!((d.cdf(x) - weight_cdf(u, theta, p).unwrap()).abs() <= 1e-10);
        let y = transport(1.0 - u, theta, p, &d).unwrap();
        prop_assert!((x + y).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn transport_is_monotone(a in unit(), b in unit(), theta in 0.0f64..=0.5) {
        let d = BetaGaussian::new(1.5).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(transport(lo, theta, 1.0, &d).unwrap() <= transport(hi, theta, 1.0, &d).unwrap());
    }

    #[test]
    fn quantile_inverts_cdf(u in 1e-12f64..0.5, beta in 0.5f64..4.0) {
        let d = BetaGaussian::new(beta).unwrap();
        let x = d.quantile(u).unwrap();
        prop_assert!((d.cdf(x) / u - 1.0).abs() <= 1e-11);
        prop_assert!((d.quantile(1.0 - u).unwrap() + x).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn upper_tail_matches_incomplete_gamma(x in 0.0f64..30.0, beta in 0.5f64..4.0) {
        let d = BetaGaussian::new(beta).unwrap();
        let oracle = 0.5 * gamma_ur(1.0 / beta, x.powf(beta) / beta);
        prop_assume!(oracle > 1e-280);
        prop_assert!((d.ln_upper_tail(x).exp() / oracle - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn schedule_scales_by_powers(theta0 in 1e-3f64..0.49, e in 0.0f64..8.0, j in 1usize..40) {
        let th = power_schedule(theta0, e, 2 * j);
        prop_assert!((th[0] - theta0).abs() <= 1e-15);
        prop_assert!((th[2 * j - 1] / th[j - 1] - 2f64.powf(-e)).abs() <= 1e-12);
        prop_assert!(th.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn large_q_rate_is_a_root(rho in 1.1f64..6.0, q in 2.01f64..50.0) {
        let a = alpha_star_large_q(rho, q);
        let f = (q - 2.0) * a * a - (2.0 * q * rho - q + 4.0) * a + 2.0 * q * (rho - 1.0);
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!(f.abs() <= 1e-9 * (2.0 * q * rho));
    }

    #[test]
    fn moderate_rate_is_exact(rn in 3i64..40, q_num in 3i64..=8) {
        let rho = Ratio::new(rn, 2);
        let q = Ratio::new(q_num, 4);
        let a = alpha_star_moderate(rho, q);
        prop_assert_eq!(a * (rho * q + 1) + 2, rho * q);
    }

    #[test]
    fn estimator_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let d = BetaGaussian::new(1.0).unwrap();
        let t = BdisTransform::new(vec![0.1, 0.05], 1.0, d).unwrap();
        let pts = mc_points(64, 2, seed, 0);
        let f = FnIntegrand::new(2, |x: &[f64]| x[0] * x[1]);
        let g = FnIntegrand::new(2, |x: &[f64]| (x[0] - x[1]).abs().sqrt());
        let h = FnIntegrand::new(2, |x: &[f64]| a * x[0] * x[1] + b * (x[0] - x[1]).abs().sqrt());
        let (ef, eg, eh) = (estimate(&f, &t, &pts).unwrap(), estimate(&g, &t, &pts).unwrap(), estimate(&h, &t, &pts).unwrap());
        prop_assert!((eh - a * ef - b * eg).abs() <= 1e-12 * (1.0 + eh.abs()));
    }

    #[test]
    fn estimator_ignores_point_order(seed in any::<u64>(), shift in 0usize..32) {
        let d = BetaGaussian::new(2.0).unwrap();
        let t = BdisTransform::new(vec![0.2, 0.1, 0.05], 2.0, d).unwrap();
        let pts = mc_points(32, 3, seed, 1);
        let mut rows: Vec<f64> = Vec::new();
        for i in 0..32 {
            rows.extend_from_slice(pts.row((i + shift) % 32));
        }
        let rotated = PointSet::from_rows(3, rows).unwrap();
        let f = FnIntegrand::new(3, |x: &[f64]| (x[0] + 0.5 * x[1] - x[2]).exp());
        let e1 = estimate(&f, &t, &pts).unwrap();
        let e2 = estimate(&f, &t, &rotated).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-13 * e1.abs().max(1.0));
    }

    #[test]
    fn replicate_rmse_scales(values in prop::collection::vec(-10.0f64..10.0, 2..30), c in -5.0f64..5.0, shift in -100.0f64..100.0) {
        let r = replicate_rmse(&values).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| c * v + shift).collect();
        let rs = replicate_rmse(&scaled).unwrap();
        prop_assert!((rs - c.abs() * r).abs() <= 1e-10 * (1.0 + shift.abs()));
    }

    #[test]
    fn rate_fit_recovers_power_laws(slope in -2.0f64..0.0, c in 1e-3f64..1e3) {
        let ns: Vec<f64> = (4..12).map(|m| 2f64.powi(m)).collect();
        let r: Vec<f64> = ns.iter().map(|n| c * n.powf(slope)).collect();
        let fit = fit_rate(&ns, &r).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-10);
        prop_assert!((fit.intercept - c.log2()).abs() <= 1e-9);
    }
}
