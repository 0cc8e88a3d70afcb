//! Turns a configuration into methods, runs the study and writes results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bdisqmc::bdis::{power_schedule, Regime};
use bdisqmc::estimator::{reference_csv, run_study, Integrand, PointSource, Qoi, ScalarQoi, StudyConfig};
use bdisqmc::net::DirectionTable;
use bdisqmc::pde::{H1Qoi, Mesh, PdeIntegrand, PointQoi};
use bdisqmc::testfuncs::Family;
use bdisqmc::{BdisTransform, BetaGaussian, ConvergenceReport, IntegrandSpec, Method, RandomFieldSpec};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, MethodKind, Problem, QoiKind, Schedule, TestFamily};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(bdisqmc::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<bdisqmc::Error> for RunError {
    fn from(e: bdisqmc::Error) -> Self {
        match e {
            bdisqmc::Error::Config(m) => RunError::Config(ConfigError { line: None, message: m }),
            bdisqmc::Error::Io(m) => RunError::Io(std::io::Error::other(m)),
            other => RunError::Numerical(other),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

/// Shortest decimal form of an exponent for method labels.
pub fn fmt_exponent(e: f64) -> String {
    let rounded = format!("{e:.6}");
    rounded.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// One BDIS variant: label plus its damping parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BdisVariant {
    pub label: String,
    pub thetas: Vec<f64>,
}

fn variant(exponent: Option<f64>, cfg: &ExperimentConfig) -> BdisVariant {
    match exponent {
        None => BdisVariant { label: "BDIS(inversion)".into(), thetas: vec![0.0; cfg.s] },
        Some(e) => {
            BdisVariant { label: format!("BDIS(j^-{})", fmt_exponent(e)), thetas: power_schedule(cfg.theta0, e, cfg.s) }
        }
    }
}

/// Resolves the configured schedule into BDIS variants.
pub fn bdis_variants(cfg: &ExperimentConfig) -> Result<Vec<BdisVariant>, ConfigError> {
    Ok(match &cfg.schedule {
        Schedule::Inversion => vec![variant(None, cfg)],
        Schedule::Exponents(es) => es.iter().map(|&e| variant(Some(e), cfg)).collect(),
        Schedule::Auto | Schedule::AutoOmitFactorial => {
            let plan = cfg.plan().map_err(|m| ConfigError { line: None, message: m })?;
            if plan.regime == Regime::BetaGtTauInversion {
                vec![variant(None, cfg)]
            } else {
                vec![variant(Some(plan.exponent), cfg)]
            }
        }
    })
}

pub fn build_methods(cfg: &ExperimentConfig) -> Result<Vec<Method>, RunError> {
    let dist = BetaGaussian::new(cfg.beta)?;
    let mut out = Vec::new();
    for kind in &cfg.methods {
        match kind {
            MethodKind::Mc => {
                out.push(Method::new("MC", PointSource::MonteCarlo, BdisTransform::inversion(cfg.s, dist.clone())))
            }
            MethodKind::Rqmc => out.push(Method::new(
                "RQMC",
                PointSource::ScrambledSobol,
                BdisTransform::inversion(cfg.s, dist.clone()),
            )),
            MethodKind::Bdis => {
                for v in bdis_variants(cfg)? {
                    let t = BdisTransform::new(v.thetas, cfg.p, dist.clone())?;
                    out.push(Method::new(v.label, PointSource::ScrambledSobol, t));
                }
            }
        }
    }
    Ok(out)
}

pub fn build_testfunc(cfg: &ExperimentConfig, family: TestFamily) -> Result<IntegrandSpec, RunError> {
    let dist = BetaGaussian::new(cfg.beta)?;
    let fam = match family {
        TestFamily::Constant => Family::Constant,
        TestFamily::Linear => Family::Linear { c: cfg.c },
        TestFamily::ProductLinear => Family::ProductLinear { c: vec![cfg.c; cfg.s] },
        TestFamily::SumSquare => Family::SumSquare,
        TestFamily::ExpAbs => return Ok(IntegrandSpec::exp_abs_decay(cfg.s, cfg.zeta, cfg.rho_star, cfg.tau, dist)?),
    };
    Ok(IntegrandSpec::new(fam, cfg.s, dist)?)
}

/// Guide-line orders: `n^-1/2`, `n^-1` and, with an active damping
/// schedule, `n^-(1+alpha*)/2`.
pub fn reference_orders(cfg: &ExperimentConfig) -> Vec<(String, f64)> {
    let mut orders = vec![("n^-0.5".to_string(), 0.5), ("n^-1".to_string(), 1.0)];
    if cfg.methods.contains(&MethodKind::Bdis) && cfg.schedule != Schedule::Inversion {
        if let Ok(plan) = cfg.plan() {
            if plan.regime != Regime::BetaGtTauInversion {
                let order = (1.0 + plan.alpha_star) / 2.0;
                orders.push((format!("n^-{}", fmt_exponent(order)), order));
            }
        }
    }
    orders
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub drop_transient: usize,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: ConvergenceReport,
    pub csv_path: PathBuf,
    pub reference_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: String,
}

/// Runs the study without writing anything.
pub fn execute(cfg: &ExperimentConfig, drop_transient: usize) -> Result<ConvergenceReport, RunError> {
    let methods = build_methods(cfg)?;
    if cfg.methods.iter().any(|m| *m != MethodKind::Mc) {
        let max = DirectionTable::bundled().max_dim();
        if cfg.s > max {
            return Err(ConfigError {
                line: None,
                message: format!("s = {} exceeds the {max} Sobol' dimensions", cfg.s),
            }
            .into());
        }
    }
    let study =
        StudyConfig { m_min: cfg.m_min, m_max: cfg.m_max, replicates: cfg.replicates, seed: cfg.seed, drop_transient };
    let report = match cfg.problem {
        Problem::Pde => {
            let mesh = Mesh::new(cfg.mesh_n)?;
            let field = RandomFieldSpec::new(cfg.s, cfg.zeta, cfg.rho_star)?;
            let point = PointQoi::new(&mesh)?;
            let h1 = H1Qoi::new(mesh.clone());
            let qois: Vec<&dyn Qoi<f64>> = cfg
                .qois
                .iter()
                .map(|q| match q {
                    QoiKind::H1 => &h1 as &dyn Qoi<f64>,
                    _ => &point as &dyn Qoi<f64>,
                })
                .collect();
            let integrand = PdeIntegrand::new(field, mesh);
            run_study(&methods, &integrand as &dyn Integrand<f64>, &qois, &study)?
        }
        Problem::TestFunc(family) => {
            let integrand = build_testfunc(cfg, family)?;
            let scalar = ScalarQoi::new(QoiKind::Scalar.name(), 0);
            run_study(&methods, &integrand as &dyn Integrand<f64>, &[&scalar], &study)?
        }
    };
    Ok(report)
}

fn companion(csv: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    csv.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

pub fn summarize(cfg: &ExperimentConfig, report: &ConvergenceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "problem {} s={} beta={} tau={} m={}..{} R={} seed={}",
        cfg.problem.name(),
        cfg.s,
        cfg.beta,
        cfg.tau,
        cfg.m_min,
        cfg.m_max,
        cfg.replicates,
        cfg.seed
    );
    for s in &report.slopes {
        let _ = writeln!(out, "{:<20} {:<7} slope {:>8.4}", s.method, s.qoi, s.slope);
    }
    out
}

/// Runs the study and writes the CSV, its reference-line companion and a
/// plain-text summary.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let report = execute(cfg, opts.drop_transient)?;
    let csv_path = match &opts.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            dir.join(Path::new(&cfg.output).file_name().unwrap_or_else(|| "results.csv".as_ref()))
        }
        None => PathBuf::from(&cfg.output),
    };
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&csv_path, report.to_csv())?;
    let reference_path = companion(&csv_path, "reference", "csv");
    fs::write(&reference_path, reference_csv(&report.reference_lines(&reference_orders(cfg))))?;
    let summary = summarize(cfg, &report);
    let summary_path = companion(&csv_path, "summary", "txt");
    fs::write(&summary_path, &summary)?;
    Ok(RunOutput { report, csv_path, reference_path, summary_path, summary })
}

/// Text for the `schedule` subcommand.
pub fn describe_schedule(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let mut out = String::new();
    match cfg.plan() {
        Ok(plan) => {
            let _ = writeln!(out, "regime    {}", plan.regime.name());
            match plan.q_star {
                Some(q) => {
                    let _ = writeln!(out, "q*        {q}");
                }
                None => {
                    let _ = writeln!(out, "q*        unbounded");
                }
            }
            let _ = writeln!(out, "rho       {}", plan.rho);
            let _ = writeln!(out, "exponent  {}", plan.exponent);
            let _ = writeln!(out, "alpha*    {}", plan.alpha_star);
            let _ = writeln!(out, "rmse rate n^-{}", (1.0 + plan.alpha_star) / 2.0);
        }
        Err(m) if matches!(cfg.schedule, Schedule::Auto | Schedule::AutoOmitFactorial) => {
            return Err(ConfigError { line: None, message: m }.into());
        }
        Err(m) => {
            let _ = writeln!(out, "no planned rate: {m}");
        }
    }
    for v in bdis_variants(cfg)? {
        let _ = writeln!(out, "{}", v.label);
        for (j, th) in v.thetas.iter().enumerate() {
            let _ = writeln!(out, "  theta_{:<4} {th:.10e}", j + 1);
        }
    }
    Ok(out)
}

/// Text for the `check-net` subcommand: quality of the unscrambled net and
/// of one scrambled replicate.
pub fn describe_net(m: u32, s: usize) -> Result<String, RunError> {
    let net = DirectionTable::bundled().generate(m, s)?;
    let t = bdisqmc::net::min_quality(&net.points(), m)?;
    let ts = bdisqmc::net::min_quality(&net.owen_scramble(0, 0), m)?;
    Ok(format!("sobol m={m} s={s}: t = {t} (scrambled: t = {ts})\n"))
}
