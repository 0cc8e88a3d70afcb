//! Flat `key = value` experiment configuration.

use std::collections::HashMap;
use std::fmt;

use bdisqmc::bdis::{plan_schedule, ScheduleInput};
use bdisqmc::SchedulePlan;

/// Integrand family for PDE-free studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestFamily {
    Constant,
    Linear,
    ProductLinear,
    ExpAbs,
    SumSquare,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Pde,
    TestFunc(TestFamily),
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Pde => "pde",
            Problem::TestFunc(TestFamily::Constant) => "constant",
            Problem::TestFunc(TestFamily::Linear) => "linear",
            Problem::TestFunc(TestFamily::ProductLinear) => "product_linear",
            Problem::TestFunc(TestFamily::ExpAbs) => "exp_abs",
            Problem::TestFunc(TestFamily::SumSquare) => "sum_square",
        }
    }

    fn parse(v: &str) -> Option<Self> {
        Some(match v {
            "pde" => Problem::Pde,
            "constant" => Problem::TestFunc(TestFamily::Constant),
            "linear" => Problem::TestFunc(TestFamily::Linear),
            "product_linear" => Problem::TestFunc(TestFamily::ProductLinear),
            "exp_abs" => Problem::TestFunc(TestFamily::ExpAbs),
            "sum_square" => Problem::TestFunc(TestFamily::SumSquare),
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// Planned from the decay and growth parameters.
    Auto,
    /// Planned with the factorial part of the weights dropped.
    AutoOmitFactorial,
    /// One BDIS method per exponent, `theta_j = theta0 * j^-e`.
    Exponents(Vec<f64>),
    /// All `theta_j = 0`.
    Inversion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodKind {
    Mc,
    Rqmc,
    Bdis,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Mc => "MC",
            MethodKind::Rqmc => "RQMC",
            MethodKind::Bdis => "BDIS",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QoiKind {
    Point,
    H1,
    Scalar,
}

impl QoiKind {
    pub fn name(self) -> &'static str {
        match self {
            QoiKind::Point => "point",
            QoiKind::H1 => "h1",
            QoiKind::Scalar => "scalar",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub s: usize,
    pub beta: f64,
    pub tau: f64,
    pub zeta: f64,
    pub rho_star: f64,
    pub sigma: f64,
    pub theta0: f64,
    pub p: f64,
    /// Coefficient of the `linear` and `product_linear` test functions.
    pub c: f64,
    pub schedule: Schedule,
    pub m_min: u32,
    pub m_max: u32,
    pub replicates: usize,
    pub mesh_n: usize,
    pub seed: u64,
    pub methods: Vec<MethodKind>,
    pub qois: Vec<QoiKind>,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[&str] = &[
    "problem", "s", "beta", "tau", "zeta", "rho_star", "sigma", "theta0", "p", "c", "schedule", "m_min", "m_max", "R",
    "mesh_n", "seed", "methods", "qois", "output",
];
const REQUIRED: &[&str] = &["s", "beta", "tau", "zeta", "rho_star", "m_min", "m_max", "seed"];

struct Raw<'a> {
    values: HashMap<&'a str, (usize, &'a str)>,
}

impl<'a> Raw<'a> {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { line: self.values.get(key).map(|&(l, _)| l), message: message.into() }
    }

    fn get<V: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<V>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(&(line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError { line: Some(line), message: format!("{key}: expected {what}, got '{v}'") }),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.get(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(self.err(key, format!("{key} must be finite"))),
            other => Ok(other),
        }
    }
}

fn list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// Parses and validates a configuration. Defaults are applied for omitted
/// optional keys; unknown and repeated keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut values = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError { line: Some(line_no), message: format!("expected 'key = value', got '{body}'") });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError { line: Some(line_no), message: format!("unknown key '{k}'") });
        }
        if v.is_empty() {
            return Err(ConfigError { line: Some(line_no), message: format!("{k}: missing value") });
        }
        if let Some(&(prev, _)) = values.get(k) {
            return Err(ConfigError { line: Some(line_no), message: format!("{k} already set on line {prev}") });
        }
        values.insert(k, (line_no, v));
    }
    let raw = Raw { values };
    if let Some(k) = REQUIRED.iter().find(|k| !raw.values.contains_key(*k)) {
        return Err(ConfigError { line: None, message: format!("missing required key '{k}'") });
    }

    let problem = match raw.values.get("problem") {
        None => Problem::Pde,
        Some(&(_, v)) => Problem::parse(v).ok_or_else(|| raw.err("problem", format!("unknown problem '{v}'")))?,
    };
    let schedule = match raw.values.get("schedule").map(|&(_, v)| v) {
        None | Some("auto") => Schedule::Auto,
        Some("auto_omit_factorial") => Schedule::AutoOmitFactorial,
        Some("inversion") => Schedule::Inversion,
        Some(v) => {
            let exps = list(v)
                .into_iter()
                .map(|e| e.parse::<f64>().ok().filter(|x| x.is_finite() && *x > 0.0))
                .collect::<Option<Vec<_>>>()
                .filter(|e| !e.is_empty())
                .ok_or_else(|| {
                    raw.err(
                        "schedule",
                        format!(
                            "schedule: expected auto, auto_omit_factorial, inversion or positive exponents, got '{v}'"
                        ),
                    )
                })?;
            Schedule::Exponents(exps)
        }
    };
    let methods = match raw.values.get("methods") {
        None => vec![MethodKind::Mc, MethodKind::Rqmc, MethodKind::Bdis],
        Some(&(_, v)) => {
            let mut out = Vec::new();
            for name in list(v) {
                let m = match name {
                    "MC" => MethodKind::Mc,
                    "RQMC" => MethodKind::Rqmc,
                    "BDIS" => MethodKind::Bdis,
                    _ => return Err(raw.err("methods", format!("unknown method '{name}'"))),
                };
                if out.contains(&m) {
                    return Err(raw.err("methods", format!("method {name} listed twice")));
                }
                out.push(m);
            }
            if out.is_empty() {
                return Err(raw.err("methods", "methods: at least one method required"));
            }
            out
        }
    };
    let qois = match raw.values.get("qois") {
        None if problem == Problem::Pde => vec![QoiKind::Point, QoiKind::H1],
        None => vec![QoiKind::Scalar],
        Some(&(_, v)) => {
            let mut out = Vec::new();
            for name in list(v) {
                let q = match (name, problem) {
                    ("point", Problem::Pde) => QoiKind::Point,
                    ("h1", Problem::Pde) => QoiKind::H1,
                    ("scalar", Problem::TestFunc(_)) => QoiKind::Scalar,
                    _ => {
                        return Err(
                            raw.err("qois", format!("qoi '{name}' is not available for problem {}", problem.name()))
                        )
                    }
                };
                if out.contains(&q) {
                    return Err(raw.err("qois", format!("qoi {name} listed twice")));
                }
                out.push(q);
            }
            if out.is_empty() {
                return Err(raw.err("qois", "qois: at least one quantity required"));
            }
            out
        }
    };

    let cfg = ExperimentConfig {
        problem,
        s: raw.get("s", "a positive integer")?.unwrap(),
        beta: raw.float("beta")?.unwrap(),
        tau: raw.float("tau")?.unwrap(),
        zeta: raw.float("zeta")?.unwrap(),
        rho_star: raw.float("rho_star")?.unwrap(),
        sigma: raw.float("sigma")?.unwrap_or(1.0),
        theta0: raw.float("theta0")?.unwrap_or(0.1),
        p: raw.float("p")?.unwrap_or(1.0),
        c: raw.float("c")?.unwrap_or(0.5),
        schedule,
        m_min: raw.get("m_min", "an integer")?.unwrap(),
        m_max: raw.get("m_max", "an integer")?.unwrap(),
        replicates: raw.get("R", "an integer")?.unwrap_or(64),
        mesh_n: raw.get("mesh_n", "an integer")?.unwrap_or(8),
        seed: raw.get("seed", "an unsigned integer")?.unwrap(),
        methods,
        qois,
        output: raw.values.get("output").map_or("results.csv", |&(_, v)| v).to_string(),
    };
    validate(&cfg, &raw)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig, raw: &Raw<'_>) -> Result<(), ConfigError> {
    let check = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(raw.err(key, msg)) };
    check(cfg.s >= 1, "s", "s >= 1 required")?;
    check(cfg.beta > 0.0, "beta", "beta > 0 required")?;
    check(cfg.tau > 0.0 && cfg.tau <= cfg.beta, "tau", "0 < tau <= beta required")?;
    check(cfg.zeta > 0.0, "zeta", "zeta > 0 required")?;
    check(cfg.rho_star > 1.0, "rho_star", "rho_star > 1 required")?;
    check(cfg.sigma >= 0.0, "sigma", "sigma >= 0 required")?;
    check(cfg.theta0 > 0.0 && cfg.theta0 < 0.5, "theta0", "theta0 must lie in (0, 1/2)")?;
    check(cfg.p >= 1.0, "p", "p >= 1 required")?;
    check(cfg.m_min >= 1, "m_min", "m_min >= 1 required")?;
    check(cfg.m_max <= 24, "m_max", "m_max <= 24 required")?;
    check(cfg.m_min <= cfg.m_max, "m_max", "m_min <= m_max required")?;
    check(cfg.replicates >= 2, "R", "R >= 2 required")?;
    if cfg.problem == Problem::Pde {
        check(cfg.mesh_n >= 2 && cfg.mesh_n.is_multiple_of(2), "mesh_n", "mesh_n must be even and >= 2")?;
    }
    if cfg.problem == Problem::TestFunc(TestFamily::ExpAbs) && cfg.tau == cfg.beta {
        check(cfg.zeta * cfg.beta < 1.0, "zeta", "beta*alpha_inf < 1 required")?;
    }
    if cfg.methods.contains(&MethodKind::Bdis) {
        match cfg.schedule {
            Schedule::Auto | Schedule::AutoOmitFactorial => {
                cfg.plan().map_err(|e| raw.err("schedule", e))?;
            }
            Schedule::Exponents(_) | Schedule::Inversion => {}
        }
    }
    if cfg.problem != Problem::Pde {
        // a spare key would be silently ignored otherwise
        check(!raw.values.contains_key("mesh_n"), "mesh_n", "mesh_n only applies to problem = pde")?;
    }
    Ok(())
}

fn fmt_list<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Sup-norm of the per-coordinate growth rates; the first term dominates.
    pub fn alpha_inf(&self) -> f64 {
        self.zeta
    }

    pub fn schedule_input(&self, omit_factorial: bool) -> ScheduleInput<f64> {
        ScheduleInput {
            beta: self.beta,
            tau: self.tau,
            alpha_inf: self.alpha_inf(),
            rho_star: self.rho_star,
            sigma: self.sigma,
            theta0: self.theta0,
            omit_factorial,
        }
    }

    /// Plan for the configured schedule; explicit schedules are planned
    /// without factorial omission.
    pub fn plan(&self) -> Result<SchedulePlan, String> {
        let omit = self.schedule == Schedule::AutoOmitFactorial;
        plan_schedule(&self.schedule_input(omit)).map_err(|e| match e {
            bdisqmc::Error::Config(m) => m,
            other => other.to_string(),
        })
    }

    /// Serializes every key, defaults included; parsing the result gives
    /// back an identical config.
    pub fn to_text(&self) -> String {
        let schedule = match &self.schedule {
            Schedule::Auto => "auto".to_string(),
            Schedule::AutoOmitFactorial => "auto_omit_factorial".to_string(),
            Schedule::Inversion => "inversion".to_string(),
            Schedule::Exponents(e) => fmt_list(e),
        };
        let methods: Vec<_> = self.methods.iter().map(|m| m.name()).collect();
        let qois: Vec<_> = self.qois.iter().map(|q| q.name()).collect();
        let mut out = format!(
            "problem = {}\ns = {}\nbeta = {}\ntau = {}\nzeta = {}\nrho_star = {}\nsigma = {}\ntheta0 = {}\np = {}\nc = {}\n\
             schedule = {schedule}\nm_min = {}\nm_max = {}\nR = {}\n",
            self.problem.name(),
            self.s,
            self.beta,
            self.tau,
            self.zeta,
            self.rho_star,
            self.sigma,
            self.theta0,
            self.p,
            self.c,
            self.m_min,
            self.m_max,
            self.replicates,
        );
        if self.problem == Problem::Pde {
            out.push_str(&format!("mesh_n = {}\n", self.mesh_n));
        }
        out.push_str(&format!(
            "seed = {}\nmethods = {}\nqois = {}\noutput = {}\n",
            self.seed,
            fmt_list(&methods),
            fmt_list(&qois),
            self.output
        ));
        out
    }
}
