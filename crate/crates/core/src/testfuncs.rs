//! Closed-form integrand families with known means under i.i.d.
//! beta-Gaussian coordinates.

use crate::dists::BetaGaussian;
use crate::error::{Error, Result};
use crate::estimator::Integrand;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Family<T> {
    /// `f = 1`.
    Constant,
    /// `f = 1 + c * sum_j x_j`.
    Linear { c: T },
    /// `f = prod_j (1 + c_j x_j)`.
    ProductLinear { c: Vec<T> },
    /// `f = exp(sum_j a_j |x_j|^tau)`.
    ExpAbs { a: Vec<T>, tau: T },
    /// `f = sum_j x_j^2`.
    SumSquare,
}

impl<T> Family<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::Linear { .. } => "linear",
            Family::ProductLinear { .. } => "product_linear",
            Family::ExpAbs { .. } => "exp_abs",
            Family::SumSquare => "sum_square",
        }
    }
}

/// A test integrand on `R^s` together with the law of its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrandSpec<T> {
    family: Family<T>,
    dim: usize,
    dist: BetaGaussian<T>,
}

impl<T: Real> IntegrandSpec<T> {
    pub fn new(family: Family<T>, dim: usize, dist: BetaGaussian<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("integrand dimension must be at least 1".into()));
        }
        match &family {
            Family::ProductLinear { c } if c.len() != dim => {
                return Err(Error::Config(format!("product_linear has {} coefficients for s = {dim}", c.len())));
            }
            Family::ExpAbs { a, tau } => {
                if a.len() != dim {
                    return Err(Error::Config(format!("exp_abs has {} coefficients for s = {dim}", a.len())));
                }
                let beta = dist.beta();
                if !(*tau > T::zero() && *tau <= beta) {
                    return Err(Error::Config(format!(
                        "exp_abs needs 0 < tau <= beta, got tau = {tau}, beta = {beta}"
                    )));
                }
                if a.iter().any(|v| !(*v >= T::zero() && v.is_finite())) {
                    return Err(Error::Config("exp_abs coefficients must be finite and nonnegative".into()));
                }
                let amax = a.iter().copied().fold(T::zero(), T::max);
                if *tau == beta && amax * beta >= T::one() {
                    return Err(Error::Config(format!(
                        "exp_abs with tau = beta needs max a_j * beta < 1, got {}",
                        amax * beta
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { family, dim, dist })
    }

    /// `exp(sum_j a_j |x_j|^tau)` with `a_j = zeta * j^{-rho_star}`.
    pub fn exp_abs_decay(dim: usize, zeta: T, rho_star: T, tau: T, dist: BetaGaussian<T>) -> Result<Self> {
        let a = (1..=dim).map(|j| zeta * T::from_usize_lossy(j).powf(-rho_star)).collect();
        Self::new(Family::ExpAbs { a, tau }, dim, dist)
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn dist(&self) -> &BetaGaussian<T> {
        &self.dist
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at `x`, and whether it was capped at the largest finite value.
    pub fn evaluate_flagged(&self, x: &[T]) -> (T, bool) {
        match &self.family {
            Family::Constant => (T::one(), false),
            Family::Linear { c } => (T::one() + *c * x.iter().copied().sum::<T>(), false),
            Family::ProductLinear { c } => {
                (c.iter().zip(x).fold(T::one(), |acc, (&c, &x)| acc * (T::one() + c * x)), false)
            }
            Family::ExpAbs { a, tau } => {
                let ln: T = a.iter().zip(x).map(|(&a, &x)| a * x.abs().powf(*tau)).sum();
                if ln > T::max_value().ln() {
                    (T::max_value(), true)
                } else {
                    (ln.exp(), false)
                }
            }
            Family::SumSquare => (x.iter().map(|&v| v * v).sum(), false),
        }
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        self.evaluate_flagged(x).0
    }

    /// `E[f(X)]`; `+inf` when the mean diverges.
    pub fn exact_mean(&self) -> Result<T> {
        match &self.family {
            Family::Constant | Family::Linear { .. } | Family::ProductLinear { .. } => Ok(T::one()),
            Family::ExpAbs { a, tau } => {
                let mut ln = T::zero();
                for &aj in a {
                    ln = ln + self.dist.exp_moment(aj, *tau)?.ln();
                }
                Ok(ln.exp())
            }
            Family::SumSquare => Ok(T::from_usize_lossy(self.dim) * self.dist.second_moment()),
        }
    }
}

impl<T: Real> Integrand<T> for IntegrandSpec<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[T], out: &mut [T]) -> Result<()> {
        out[0] = self.evaluate(x);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_half_line;

    fn bg(beta: f64) -> BetaGaussian<f64> {
        BetaGaussian::new(beta).unwrap()
    }

    fn all_families(beta: f64) -> Vec<IntegrandSpec<f64>> {
        let d = bg(beta);
        vec![
            IntegrandSpec::new(Family::Constant, 2, d.clone()).unwrap(),
            IntegrandSpec::new(Family::Linear { c: 0.7 }, 2, d.clone()).unwrap(),
            IntegrandSpec::new(Family::ProductLinear { c: vec![1.0, -0.5] }, 2, d.clone()).unwrap(),
            IntegrandSpec::new(Family::ExpAbs { a: vec![0.3, 0.2], tau: beta }, 2, d.clone()).unwrap(),
            IntegrandSpec::new(Family::ExpAbs { a: vec![0.3, 0.2], tau: 0.5 }, 2, d.clone()).unwrap(),
            IntegrandSpec::new(Family::SumSquare, 2, d).unwrap(),
        ]
    }

    #[test]
    fn evaluation_examples() {
        let d = bg(1.0);
        let c = IntegrandSpec::new(Family::Constant, 3, d.clone()).unwrap();
        assert_eq!(c.evaluate(&[4.0, -1.0, 9.0]), 1.0);
        let p = IntegrandSpec::new(Family::ProductLinear { c: vec![1.0, 1.0] }, 2, d.clone()).unwrap();
        assert_eq!(p.evaluate(&[2.0, 3.0]), 12.0);
        let e = IntegrandSpec::new(Family::ExpAbs { a: vec![0.3, 0.2], tau: 1.0 }, 2, d).unwrap();
        assert!((e.evaluate(&[1.0, -1.0]) - 0.5f64.exp()).abs() < 1e-15);
        assert_eq!(e.evaluate_flagged(&[1e6, 0.0]), (f64::MAX, true));
    }

    #[test]
    fn exact_mean_examples() {
        let e = IntegrandSpec::new(Family::ExpAbs { a: vec![0.3, 0.2], tau: 1.0 }, 2, bg(1.0)).unwrap();
        assert!((e.exact_mean().unwrap() - 1.0 / (0.7 * 0.8)).abs() < 1e-14);
        let p = IntegrandSpec::new(Family::ProductLinear { c: vec![3.0, -2.0, 5.0] }, 3, bg(1.3)).unwrap();
        assert_eq!(p.exact_mean().unwrap(), 1.0);
        let q = IntegrandSpec::new(Family::SumSquare, 3, bg(2.0)).unwrap();
        assert!((q.exact_mean().unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_divergent_growth() {
        let err = IntegrandSpec::new(Family::ExpAbs { a: vec![1.2], tau: 1.0 }, 1, bg(1.0));
        assert!(matches!(err, Err(Error::Config(_))));
        let err = IntegrandSpec::new(Family::ExpAbs { a: vec![0.1], tau: 3.0 }, 1, bg(2.0));
        assert!(matches!(err, Err(Error::Config(_))));
        let err = IntegrandSpec::new(Family::ProductLinear { c: vec![0.1] }, 2, bg(2.0));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    // Nested adaptive quadrature over the four quadrants of the plane.
    fn plane_mean(f: &IntegrandSpec<f64>) -> f64 {
        let d = f.dist().clone();
        let pdf = |x: f64| d.norm() * (-x.abs().powf(d.beta()) / d.beta()).exp();
        let inner = |x1: f64| {
            integrate_half_line(|x2: f64| (f.evaluate(&[x1, x2]) + f.evaluate(&[x1, -x2])) * pdf(x1) * pdf(x2), 1e-13)
        };
        integrate_half_line(|x1: f64| inner(x1) + inner(-x1), 1e-12)
    }

    #[test]
    fn planar_quadrature_matches_exact_mean() {
        for beta in [1.0, 2.0, 1.5] {
            for f in all_families(beta) {
                let q = plane_mean(&f);
                let e = f.exact_mean().unwrap();
                assert!((q - e).abs() < 1e-6 * e.abs().max(1.0), "{} beta={beta}: {q} vs {e}", f.family().name());
            }
        }
    }

    #[test]
    fn sub_critical_growth_matches_series() {
        // E exp(a|X|^tau) = sum_k a^k/k! E|X|^{k tau},
        // E|X|^r = beta^{r/beta} Gamma((r+1)/beta) / Gamma(1/beta)
        let (beta, tau, a) = (2.0f64, 1.0f64, 0.6f64);
        let g = |v: f64| crate::special::gamma(v);
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 0..80 {
            if k > 0 {
                fact *= k as f64;
            }
            let r = k as f64 * tau;
            sum += a.powi(k) / fact * beta.powf(r / beta) * g((r + 1.0) / beta) / g(1.0 / beta);
        }
        let got = bg(beta).exp_moment(a, tau).unwrap();
        assert!((got - sum).abs() < 1e-10 * sum, "{got} vs {sum}");
    }
}
