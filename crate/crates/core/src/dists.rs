//! Symmetric light-tailed coordinate densities.
//!
//! [`Density`] is the plug-in interface the transport map needs; the only
//! shipped family is the generalized beta-Gaussian
//! `phi(x) = c * exp(-|x|^beta / beta)`, which is the Laplace law for
//! `beta = 1` and the standard Gaussian for `beta = 2`.

use std::fmt::Debug;

use crate::error::{domain, Result};
use crate::quad;
use crate::scalar::Real;
use crate::special::{gamma_p, gamma_q, ln_gamma, ln_gamma_p, ln_gamma_q, ln_gamma_q_scaled};

/// A symmetric, strictly positive, bounded density on the real line.
///
/// Implementors supply the upper tail in log form and its inverse; the
/// two-sided quantile is assembled by reflection so that
/// `quantile(1 - u) == -quantile(u)` holds whenever `1 - u` is exact.
pub trait Density<T: Real>: Clone + Debug + Send + Sync {
    fn pdf(&self, x: T) -> T;

    fn ln_pdf(&self, x: T) -> T;

    fn cdf(&self, x: T) -> T;

    /// `ln(1 - Phi(x))` for `x >= 0`.
    fn ln_upper_tail(&self, x: T) -> T;

    /// The `x >= 0` with `1 - Phi(x) = exp(ln_p)`, for `ln_p <= ln(1/2)`.
    fn upper_quantile_ln(&self, ln_p: T) -> T;

    /// Inverse CDF on the open unit interval.
    fn quantile(&self, u: T) -> Result<T> {
        if !(u > T::zero() && u < T::one()) {
            return domain(format!("quantile argument {u} outside (0, 1)"));
        }
        let half = T::lit(0.5);
        Ok(if u == half {
            T::zero()
        } else if u < half {
            -self.upper_quantile_ln(u.ln())
        } else {
            self.upper_quantile_ln((T::one() - u).ln())
        })
    }

    /// Mills ratio `(1 - Phi(x)) / phi(x)` for `x >= 0`.
    fn mills_ratio(&self, x: T) -> Result<T> {
        if !(x >= T::zero()) {
            return domain(format!("mills ratio needs x >= 0, got {x}"));
        }
        Ok((self.ln_upper_tail(x) - self.ln_pdf(x)).exp())
    }
}

/// Generalized beta-Gaussian law with density
/// `c * exp(-|x|^beta / beta)`, `c = 1 / (2 beta^{1/beta} Gamma(1 + 1/beta))`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaGaussian<T> {
    beta: T,
    norm: T,
    ln_norm: T,
    /// Shape `1/beta` of the underlying gamma law of `|X|^beta / beta`.
    shape: T,
    ln_gamma_shape: T,
}

impl<T: Real> BetaGaussian<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !(beta > T::zero() && beta.is_finite()) {
            return domain(format!("beta must be positive and finite, got {beta}"));
        }
        let shape = beta.recip();
        let ln_norm = -(T::lit(2.0).ln() + shape * beta.ln() + ln_gamma(T::one() + shape));
        Ok(Self { beta, norm: ln_norm.exp(), ln_norm, shape, ln_gamma_shape: ln_gamma(shape) })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// Normalization constant `c`.
    pub fn norm(&self) -> T {
        self.norm
    }

    /// `ln(|x|^beta / beta)`.
    #[inline]
    fn ln_gamma_arg(&self, ax: T) -> T {
        self.beta * ax.ln() - self.beta.ln()
    }

    /// `E[exp(alpha |X|^tau)]` for `alpha >= 0`, `0 < tau <= beta`.
    ///
    /// For `tau == beta` this is `(1 - alpha beta)^{-1/beta}`, and `+inf` once
    /// `alpha beta >= 1`. For `tau < beta` the moment is always finite and is
    /// integrated numerically.
    pub fn exp_moment(&self, alpha: T, tau: T) -> Result<T> {
        if !(alpha >= T::zero()) {
            return domain(format!("exp_moment needs alpha >= 0, got {alpha}"));
        }
        if !(tau > T::zero()) || tau > self.beta {
            return domain(format!("exp_moment needs 0 < tau <= beta = {}, got tau = {tau}", self.beta));
        }
        if alpha == T::zero() {
            return Ok(T::one());
        }
        if tau == self.beta {
            let ab = alpha * self.beta;
            if ab >= T::one() {
                return Ok(T::infinity());
            }
            return Ok((-(T::one() - ab).ln() * self.shape).exp());
        }
        let (beta, ln_norm) = (self.beta, self.ln_norm);
        let integrand = move |x: T| (ln_norm + alpha * x.powf(tau) - x.powf(beta) / beta).exp();
        let half = quad::integrate_half_line(integrand, T::lit(1e-15));
        Ok(T::lit(2.0) * half)
    }

    /// Second moment `E[X^2] = beta^{2/beta} Gamma(3/beta) / Gamma(1/beta)`.
    pub fn second_moment(&self) -> T {
        (T::lit(2.0) * self.shape * self.beta.ln() + ln_gamma(T::lit(3.0) * self.shape) - self.ln_gamma_shape).exp()
    }
}

impl<T: Real> Density<T> for BetaGaussian<T> {
    fn pdf(&self, x: T) -> T {
        self.norm * (-x.abs().powf(self.beta) / self.beta).exp()
    }

    fn ln_pdf(&self, x: T) -> T {
        self.ln_norm - x.abs().powf(self.beta) / self.beta
    }

    fn cdf(&self, x: T) -> T {
        let half = T::lit(0.5);
        let t = x.abs().powf(self.beta) / self.beta;
        if x >= T::zero() {
            half + half * gamma_p(self.shape, t)
        } else {
            half * gamma_q(self.shape, t)
        }
    }

    fn ln_upper_tail(&self, x: T) -> T {
        let ln_half = T::lit(0.5).ln();
        if x <= T::zero() {
            return ln_half;
        }
        ln_half + ln_gamma_q(self.shape, self.ln_gamma_arg(x))
    }

    fn mills_ratio(&self, x: T) -> Result<T> {
        if !(x >= T::zero()) {
            return domain(format!("mills ratio needs x >= 0, got {x}"));
        }
        // (Q(a,t)/2) / (c e^{-t}) with the e^{-t} factors cancelled analytically
        let ln_t = if x == T::zero() { T::neg_infinity() } else { self.ln_gamma_arg(x) };
        Ok((ln_gamma_q_scaled(self.shape, ln_t) - T::lit(2.0).ln() - self.ln_norm).exp())
    }

    fn upper_quantile_ln(&self, ln_p: T) -> T {
        // 1 - Phi(x) = Q(a, t) / 2 with t = x^beta / beta; solve for y = ln t.
        let target = ln_p + T::lit(2.0).ln();
        if !(target < T::zero()) {
            return T::zero();
        }
        if self.beta == T::one() {
            // Laplace: Q(1, t) = e^{-t}
            return -target;
        }
        let a = self.shape;
        let lga = self.ln_gamma_shape;
        let solver = if target < T::lit(0.5).ln() {
            TailSolver::Upper { target }
        } else {
            TailSolver::Lower { target: (-target.exp_m1()).ln() }
        };
        let y = solver.solve(a, lga);
        ((self.beta.ln() + y) / self.beta).exp()
    }
}

/// Safeguarded Newton iteration in `y = ln t` on either `ln P(a, e^y)` or
/// `ln Q(a, e^y)`, both monotone in `y`.
enum TailSolver<T> {
    Upper { target: T },
    Lower { target: T },
}

impl<T: Real> TailSolver<T> {
    /// Returns `(g(y), g'(y), g''(y))` with `g` increasing in `y`.
    fn residual(&self, a: T, lga: T, y: T) -> (T, T, T) {
        let t = y.exp();
        match *self {
            TailSolver::Upper { target } => {
                let scaled = ln_gamma_q_scaled(a, y);
                let ln_q = scaled - t;
                let h = (a * y - lga - scaled).exp();
                (target - ln_q, h, h * (a - t + h))
            }
            TailSolver::Lower { target } => {
                let ln_p = ln_gamma_p(a, y);
                let k = (a * y - t - lga - ln_p).exp();
                (ln_p - target, k, k * (a - t - k))
            }
        }
    }

    fn initial(&self, a: T, lga: T) -> T {
        match *self {
            TailSolver::Upper { target } => {
                // Q ~ t^{a-1} e^{-t} / Gamma(a)
                let t0 = -target;
                let t1 = t0 + (a - T::one()) * t0.max(T::one()).ln() - lga;
                t1.max(T::lit(1e-3)).ln()
            }
            // P ~ t^a / Gamma(a + 1)
            TailSolver::Lower { target } => (target + lga + a.ln()) / a,
        }
    }

    /// Halley from the asymptotic start; iterates bound the root from either
    /// side and a step that leaves the bracket is replaced by bisection.
    fn solve(&self, a: T, lga: T) -> T {
        let max_step = T::lit(4.0);
        let mut lo = T::neg_infinity();
        let mut hi = T::max_value().ln();
        let mut y = self.initial(a, lga).min(hi);
        let tol = T::lit(2.0) * T::epsilon();
        for _ in 0..200 {
            let (g, dg, d2g) = self.residual(a, lga, y);
            if g == T::zero() {
                return y;
            }
            if g < T::zero() {
                lo = y;
            } else {
                hi = y;
            }
            let newton = g / dg;
            let damp = T::one() - T::lit(0.5) * newton * d2g / dg;
            let halley = damp > T::lit(0.5) && damp.is_finite();
            let step = if halley { newton / damp } else { newton };
            let step = if step.is_finite() { step.max(-max_step).min(max_step) } else { max_step * g.signum() };
            let scale = y.abs().max(T::one());
            // cubic convergence: the next correction is below rounding
            if step.abs() <= tol * scale || (halley && step.abs() <= T::lit(1e-6) * scale) {
                return y - step;
            }
            let mut next = y - step;
            if !(next > lo && next < hi) {
                next = if lo.is_finite() { T::lit(0.5) * (lo + hi) } else { hi - max_step };
            }
            if (hi - lo) <= tol * scale {
                return next;
            }
            y = next;
        }
        y
    }
}
