//! Importance-sampled estimator, replicate RMSE and convergence studies.

use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use crate::bdis::BdisTransform;
use crate::dists::Density;
use crate::error::{domain, Error, Result};
use crate::net::{mc_points, mix64, DirectionTable, PointSet};
use crate::scalar::Real;

/// A vector-valued integrand on `R^s`. Scalar integrands have
/// `output_len() == 1`.
pub trait Integrand<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn output_len(&self) -> usize {
        1
    }

    fn eval(&self, x: &[T], out: &mut [T]) -> Result<()>;
}

/// Adapts a closure `Fn(&[T]) -> T` into a scalar [`Integrand`].
pub struct FnIntegrand<F> {
    dim: usize,
    f: F,
}

impl<F> FnIntegrand<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Real, F: Fn(&[T]) -> T + Sync> Integrand<T> for FnIntegrand<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[T], out: &mut [T]) -> Result<()> {
        out[0] = (self.f)(x);
        Ok(())
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }
}

impl<T: Real> CompensatedSum<T> {
    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry = self.carry + ((self.sum - t) + v);
        } else {
            self.carry = self.carry + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// `(1/n) sum_i exp(log_w(u_i)) f(T(u_i))`, componentwise.
///
/// Points whose weight vanishes contribute zero without evaluating `f`.
pub fn estimate_vec<T, D, F>(f: &F, transform: &BdisTransform<T, D>, points: &PointSet<T>) -> Result<Vec<T>>
where
    T: Real,
    D: Density<T>,
    F: Integrand<T> + ?Sized,
{
    let s = transform.dim();
    if points.dim() != s || f.dim() != s {
        return domain(format!("dimension mismatch: points {}, transform {s}, integrand {}", points.dim(), f.dim()));
    }
    if points.is_empty() {
        return domain("estimate needs at least one point");
    }
    let k = f.output_len();
    let mut acc = vec![CompensatedSum::default(); k];
    let mut x = vec![T::zero(); s];
    let mut out = vec![T::zero(); k];
    for (i, u) in points.rows().enumerate() {
        let log_w = transform.apply(u, &mut x)?;
        let w = log_w.exp();
        if w == T::zero() {
            continue;
        }
        f.eval(&x, &mut out)?;
        for (a, &v) in acc.iter_mut().zip(&out) {
            let wv = w * v;
            if !wv.is_finite() {
                return Err(Error::Evaluation { index: i, value: wv.to_f64().unwrap_or(f64::NAN) });
            }
            a.add(wv);
        }
    }
    let n = T::from_usize_lossy(points.len());
    Ok(acc.iter().map(|a| a.value() / n).collect())
}

/// Scalar form of [`estimate_vec`].
pub fn estimate<T, D, F>(f: &F, transform: &BdisTransform<T, D>, points: &PointSet<T>) -> Result<T>
where
    T: Real,
    D: Density<T>,
    F: Integrand<T> + ?Sized,
{
    let v = estimate_vec(f, transform, points)?;
    v.first().copied().ok_or_else(|| Error::Domain("integrand has no outputs".into()))
}

fn check_replicates<T: Real>(values: &[T]) -> Result<()> {
    if values.len() < 2 {
        return domain(format!("replicate RMSE needs R >= 2, got {}", values.len()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return domain(format!("replicate {i} is not finite ({})", values[i]));
    }
    Ok(())
}

/// Sample standard deviation of the replicate estimates around their mean:
/// `sqrt(sum_r (mean - v_r)^2 / (R - 1))`.
pub fn replicate_rmse<T: Real>(values: &[T]) -> Result<T> {
    check_replicates(values)?;
    let r = T::from_usize_lossy(values.len());
    let mut sum = CompensatedSum::default();
    values.iter().for_each(|&v| sum.add(v));
    let mean = sum.value() / r;
    let mut sq = CompensatedSum::default();
    values.iter().for_each(|&v| sq.add((mean - v) * (mean - v)));
    Ok((sq.value() / (r - T::one())).sqrt())
}

/// Least-squares line through `(log2 n, log2 rmse)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit<T> {
    pub slope: T,
    pub intercept: T,
}

pub fn fit_rate<T: Real>(ns: &[T], rmses: &[T]) -> Result<RateFit<T>> {
    if ns.len() != rmses.len() {
        return domain(format!("{} sample sizes but {} errors", ns.len(), rmses.len()));
    }
    if ns.len() < 3 {
        return domain(format!("rate fit needs at least 3 points, got {}", ns.len()));
    }
    if let Some(v) = ns.iter().chain(rmses).find(|v| !(**v > T::zero() && v.is_finite())) {
        return domain(format!("rate fit needs positive finite values, got {v}"));
    }
    let xs: Vec<T> = ns.iter().map(|n| n.log2()).collect();
    let ys: Vec<T> = rmses.iter().map(|r| r.log2()).collect();
    let k = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / k;
    let my = ys.iter().copied().sum::<T>() / k;
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    if sxx == T::zero() {
        return domain("rate fit needs at least two distinct sample sizes");
    }
    let slope = sxy / sxx;
    Ok(RateFit { slope, intercept: my - slope * mx })
}

/// Where the quadrature points of a method come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointSource {
    /// Counter-based i.i.d. uniforms.
    MonteCarlo,
    /// Owen-scrambled Sobol' net.
    ScrambledSobol,
}

/// A named estimator: point source plus transform.
#[derive(Clone, Debug)]
pub struct Method<T, D> {
    pub name: String,
    pub source: PointSource,
    pub transform: BdisTransform<T, D>,
}

impl<T: Real, D: Density<T>> Method<T, D> {
    pub fn new(name: impl Into<String>, source: PointSource, transform: BdisTransform<T, D>) -> Self {
        Self { name: name.into(), source, transform }
    }
}

/// Reduces the per-replicate outputs of an integrand to an error figure.
pub trait Qoi<T: Real>: Sync {
    fn name(&self) -> &str;

    /// Replicate RMSE of this quantity.
    fn rmse(&self, replicates: &[Vec<T>]) -> Result<T>;

    /// Mean of this quantity over replicates.
    fn mean(&self, replicates: &[Vec<T>]) -> T;
}

/// One component of the integrand output, treated as a scalar QoI.
#[derive(Clone, Debug)]
pub struct ScalarQoi {
    name: String,
    index: usize,
}

impl ScalarQoi {
    pub fn new(name: impl Into<String>, index: usize) -> Self {
        Self { name: name.into(), index }
    }
}

impl<T: Real> Qoi<T> for ScalarQoi {
    fn name(&self) -> &str {
        &self.name
    }

    fn rmse(&self, replicates: &[Vec<T>]) -> Result<T> {
        let vals: Vec<T> = replicates.iter().map(|r| r[self.index]).collect();
        replicate_rmse(&vals)
    }

    fn mean(&self, replicates: &[Vec<T>]) -> T {
        let mut s = CompensatedSum::default();
        replicates.iter().for_each(|r| s.add(r[self.index]));
        s.value() / T::from_usize_lossy(replicates.len())
    }
}

/// Sample-size range and replication of a study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StudyConfig {
    pub m_min: u32,
    pub m_max: u32,
    pub replicates: usize,
    pub seed: u64,
    /// Smallest levels excluded from the rate fit.
    pub drop_transient: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow<T> {
    pub method: String,
    pub m: u32,
    pub n: usize,
    pub replicates: usize,
    pub qoi: String,
    pub rmse: T,
    pub mean_estimate: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeRow<T> {
    pub method: String,
    pub qoi: String,
    pub slope: T,
    pub intercept: T,
}

/// Per-(method, n, QoI) RMSE table with fitted log2-log2 rates.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport<T> {
    pub rows: Vec<ReportRow<T>>,
    pub slopes: Vec<SlopeRow<T>>,
}

/// Seed of sample-size level `m`.
pub fn level_seed(seed: u64, m: u32) -> u64 {
    mix64(seed ^ mix64(0x5eed_0000_0000_0000 | m as u64))
}

/// Runs every method at every level `m_min..=m_max` with `R` independent
/// replicates, reduces each QoI to a replicate RMSE and fits its rate.
///
/// Every level draws fresh, independent randomizations, so the RMSE
/// estimates entering the rate fit are independent. Sobol'-based methods at
/// the same level and replicate share one scrambled point set. Results are
/// keyed by index, so the report does not depend on thread scheduling.
pub fn run_study<T, D>(
    methods: &[Method<T, D>],
    integrand: &dyn Integrand<T>,
    qois: &[&dyn Qoi<T>],
    cfg: &StudyConfig,
) -> Result<ConvergenceReport<T>>
where
    T: Real,
    D: Density<T>,
{
    run_study_with_table(&DirectionTable::bundled(), methods, integrand, qois, cfg)
}

pub fn run_study_with_table<T, D>(
    table: &DirectionTable,
    methods: &[Method<T, D>],
    integrand: &dyn Integrand<T>,
    qois: &[&dyn Qoi<T>],
    cfg: &StudyConfig,
) -> Result<ConvergenceReport<T>>
where
    T: Real,
    D: Density<T>,
{
    let s = integrand.dim();
    if cfg.replicates < 2 {
        return Err(Error::Config(format!("R >= 2 required, got {}", cfg.replicates)));
    }
    if cfg.m_min > cfg.m_max {
        return Err(Error::Config(format!("m_min = {} exceeds m_max = {}", cfg.m_min, cfg.m_max)));
    }
    if let Some(bad) = methods.iter().find(|m| m.transform.dim() != s) {
        return Err(Error::Config(format!(
            "method {} has dimension {}, integrand has {s}",
            bad.name,
            bad.transform.dim()
        )));
    }
    let need_sobol = methods.iter().any(|m| m.source == PointSource::ScrambledSobol);
    let need_mc = methods.iter().any(|m| m.source == PointSource::MonteCarlo);

    // outputs[level][method][replicate] -> integrand output vector
    let mut outputs: Vec<Vec<Vec<Vec<T>>>> = Vec::new();
    for m in cfg.m_min..=cfg.m_max {
        let n = 1usize << m;
        let seed = level_seed(cfg.seed, m);
        let net = if need_sobol { Some(table.generate(m, s)?) } else { None };
        let per_rep: Vec<Vec<Vec<T>>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| -> Result<Vec<Vec<T>>> {
                let sobol = net.as_ref().map(|net| net.owen_scramble(seed, r as u64).map(T::open_unit));
                let mc = if need_mc { Some(mc_points(n, s, seed, r as u64).map(T::open_unit)) } else { None };
                methods
                    .iter()
                    .map(|method| {
                        let pts = match method.source {
                            PointSource::ScrambledSobol => sobol.as_ref(),
                            PointSource::MonteCarlo => mc.as_ref(),
                        }
                        .expect("point set prepared for every requested source");
                        estimate_vec(integrand, &method.transform, pts)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        // transpose to [method][replicate]
        let mut by_method = vec![Vec::with_capacity(cfg.replicates); methods.len()];
        for rep in per_rep {
            for (k, v) in rep.into_iter().enumerate() {
                by_method[k].push(v);
            }
        }
        outputs.push(by_method);
    }

    let mut rows = Vec::new();
    for (k, method) in methods.iter().enumerate() {
        for (level, m) in (cfg.m_min..=cfg.m_max).enumerate() {
            let reps = &outputs[level][k];
            for q in qois {
                rows.push(ReportRow {
                    method: method.name.clone(),
                    m,
                    n: 1usize << m,
                    replicates: cfg.replicates,
                    qoi: q.name().to_string(),
                    rmse: q.rmse(reps)?,
                    mean_estimate: q.mean(reps),
                });
            }
        }
    }
    let mut report = ConvergenceReport { rows, slopes: Vec::new() };
    report.refit(cfg.drop_transient);
    Ok(report)
}

impl<T: Real> ConvergenceReport<T> {
    /// Distinct `(method, qoi)` pairs in row order.
    pub fn series(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|(m, q)| *m == r.method && *q == r.qoi) {
                out.push((r.method.clone(), r.qoi.clone()));
            }
        }
        out
    }

    /// Rows of one series, ordered by `n`.
    pub fn series_rows(&self, method: &str, qoi: &str) -> Vec<&ReportRow<T>> {
        let mut rows: Vec<_> = self.rows.iter().filter(|r| r.method == method && r.qoi == qoi).collect();
        rows.sort_by_key(|r| r.n);
        rows
    }

    /// Recomputes every slope, ignoring the `drop` smallest sample sizes.
    /// Series that cannot be fitted (too few levels, zero RMSE) get NaN.
    pub fn refit(&mut self, drop: usize) {
        self.slopes = self
            .series()
            .into_iter()
            .map(|(method, qoi)| {
                let rows = self.series_rows(&method, &qoi);
                let used = &rows[drop.min(rows.len())..];
                let ns: Vec<T> = used.iter().map(|r| T::from_usize_lossy(r.n)).collect();
                let es: Vec<T> = used.iter().map(|r| r.rmse).collect();
                let fit = fit_rate(&ns, &es).unwrap_or_else(|e| {
                    warn!("no rate for {method}/{qoi}: {e}");
                    RateFit { slope: T::nan(), intercept: T::nan() }
                });
                SlopeRow { method, qoi, slope: fit.slope, intercept: fit.intercept }
            })
            .collect();
    }

    pub fn slope(&self, method: &str, qoi: &str) -> Option<T> {
        self.slopes.iter().find(|s| s.method == method && s.qoi == qoi).map(|s| s.slope)
    }

    /// CSV with columns `method,n,R,qoi,rmse,mean_estimate`, followed by a
    /// `# slope` section with columns `method,qoi,slope,intercept`. Floats
    /// carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,n,R,qoi,rmse,mean_estimate\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.16e},{:.16e}",
                r.method, r.n, r.replicates, r.qoi, r.rmse, r.mean_estimate
            );
        }
        out.push_str("# slope\nmethod,qoi,slope,intercept\n");
        for s in &self.slopes {
            let _ = writeln!(out, "{},{},{:.16e},{:.16e}", s.method, s.qoi, s.slope, s.intercept);
        }
        out
    }

    /// Guide lines `rmse_0 (n / n_0)^{-order}` anchored at the smallest-`n`
    /// row of every series.
    pub fn reference_lines(&self, orders: &[(String, T)]) -> Vec<ReferenceRow<T>> {
        let mut out = Vec::new();
        for (method, qoi) in self.series() {
            let rows = self.series_rows(&method, &qoi);
            let Some(first) = rows.first() else { continue };
            let n0 = T::from_usize_lossy(first.n);
            for (label, order) in orders {
                for r in &rows {
                    let ratio = T::from_usize_lossy(r.n) / n0;
                    out.push(ReferenceRow {
                        method: method.clone(),
                        qoi: qoi.clone(),
                        reference: label.clone(),
                        n: r.n,
                        value: first.rmse * ratio.powf(-*order),
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRow<T> {
    pub method: String,
    pub qoi: String,
    pub reference: String,
    pub n: usize,
    pub value: T,
}

/// CSV for reference lines: `method,qoi,reference,n,value`.
pub fn reference_csv<T: Real>(rows: &[ReferenceRow<T>]) -> String {
    let mut out = String::from("method,qoi,reference,n,value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{:.16e}", r.method, r.qoi, r.reference, r.n, r.value);
    }
    out
}
