use bdisqmc::estimator::{estimate, run_study, Integrand, PointSource, ScalarQoi, StudyConfig};
use bdisqmc::net::mc_points;
use bdisqmc::testfuncs::Family;
use bdisqmc::{BdisTransform, BetaGaussian, IntegrandSpec, Method};

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn monte_carlo_bdis_is_unbiased() {
    let cases = [
        (IntegrandSpec::new(Family::Linear { c: 0.5 }, 3, BetaGaussian::new(2.0).unwrap()).unwrap(), 0.05),
        (IntegrandSpec::new(Family::SumSquare, 3, BetaGaussian::new(1.0).unwrap()).unwrap(), 0.2),
        (IntegrandSpec::exp_abs_decay(3, 0.5, 2.0, 1.0, BetaGaussian::new(1.0).unwrap()).unwrap(), 0.1),
    ];
    for (spec, theta0) in &cases {
        let t = BdisTransform::new(vec![*theta0; 3], 1.0, spec.dist().clone()).unwrap();
        let estimates: Vec<f64> = (0..40).map(|r| estimate(spec, &t, &mc_points(4096, 3, 11, r)).unwrap()).collect();
        let (mean, se) = mean_and_se(&estimates);
        let exact = spec.exact_mean().unwrap();
        assert!((mean - exact).abs() <= 4.0 * se, "{}: {mean} vs {exact} (se {se})", spec.family().name());
    }
}

#[test]
fn studies_are_reproducible_and_seed_dependent() {
    let dist = BetaGaussian::new(1.0).unwrap();
    let spec = IntegrandSpec::exp_abs_decay(4, 2.0 / 3.0, 4.0, 1.0, dist.clone()).unwrap();
    let methods = vec![
        Method::new("MC", PointSource::MonteCarlo, BdisTransform::inversion(4, dist.clone())),
        Method::new("RQMC", PointSource::ScrambledSobol, BdisTransform::inversion(4, dist.clone())),
    ];
    let qoi = ScalarQoi::new("scalar", 0);
    let cfg = |seed| StudyConfig { m_min: 4, m_max: 7, replicates: 6, seed, drop_transient: 0 };
    let run = |seed| run_study(&methods, &spec as &dyn Integrand<f64>, &[&qoi], &cfg(seed)).unwrap().to_csv();
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn rqmc_beats_mc_on_smooth_integrand() {
    let dist = BetaGaussian::new(2.0).unwrap();
    let spec = IntegrandSpec::new(Family::ProductLinear { c: vec![0.3, 0.2, 0.1] }, 3, dist.clone()).unwrap();
    let methods = vec![
        Method::new("MC", PointSource::MonteCarlo, BdisTransform::inversion(3, dist.clone())),
        Method::new("RQMC", PointSource::ScrambledSobol, BdisTransform::inversion(3, dist)),
    ];
    let qoi = ScalarQoi::new("scalar", 0);
    let cfg = StudyConfig { m_min: 5, m_max: 11, replicates: 12, seed: 3, drop_transient: 0 };
    let report = run_study(&methods, &spec as &dyn Integrand<f64>, &[&qoi], &cfg).unwrap();
    let mc = report.slope("MC", "scalar").unwrap();
    let rqmc = report.slope("RQMC", "scalar").unwrap();
    assert!((mc + 0.5).abs() <= 0.15, "MC slope {mc}");
    assert!(rqmc < mc - 0.3, "RQMC slope {rqmc} vs MC {mc}");
}
