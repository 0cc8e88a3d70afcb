//! The boundary-damping transform.
//!
//! For a damping parameter `theta in (0, 1/2]` the weight `w_theta` on
//! `(0, 1)` is a plateau of height `1/(1 - theta)` on `[theta, 1 - theta]`
//! that falls to zero at both ends through the bump `eta_p`. Its antiderivative
//! `W_theta` is a CDF on `[0, 1]`, and the transport map
//! `T(u) = Phi^{-1}(W_theta(u))` pushes the uniform law weighted by `w_theta`
//! onto the target density. `theta = 0` means plain inversion: `w = 1`,
//! `T = Phi^{-1}`.

use log::warn;

use crate::dists::Density;
use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Largest damping parameter a schedule may emit after clipping.
pub const THETA_CLIP: f64 = 0.499_999;

/// `ln eta_p(v)` for `v in (0, 1/2]`.
#[inline]
fn ln_eta<T: Real>(v: T, p: T) -> T {
    let two = T::lit(2.0);
    two.powf(p) - v.powf(-p) - (p + two) * two.ln() - (p + T::one()) * v.ln()
}

/// `ln H_p(v)` with `H_p(v) = int_0^v eta_p = e^{2^p - v^{-p}} / (p 2^{p+2})`.
#[inline]
fn ln_eta_mass<T: Real>(v: T, p: T) -> T {
    let two = T::lit(2.0);
    two.powf(p) - v.powf(-p) - p.ln() - (p + two) * two.ln()
}

/// Bump function `eta_p(u) = 2^{-p-2} u^{-p-1} exp(2^p - u^{-p})` on `[0, 1/2]`,
/// with `eta_p(0) = 0`.
pub fn eta<T: Real>(u: T, p: T) -> Result<T> {
    if !(u >= T::zero() && u <= T::lit(0.5)) {
        return domain(format!("eta argument {u} outside [0, 1/2]"));
    }
    if u == T::zero() {
        return Ok(T::zero());
    }
    Ok(ln_eta(u, p).exp())
}

/// `ln w_theta(u)` for `u in (0, 1)`; `-inf` where the weight vanishes.
pub fn ln_weight<T: Real>(u: T, theta: T, p: T) -> T {
    if theta == T::zero() {
        return T::zero();
    }
    let half = T::lit(0.5);
    let u = if u > half { T::one() - u } else { u };
    let ln_plateau = -(T::one() - theta).ln();
    if u >= theta {
        ln_plateau
    } else if u <= half * theta {
        if u <= T::zero() {
            T::neg_infinity()
        } else {
            ln_plateau + ln_eta(u / theta, p)
        }
    } else {
        let v = T::one() - u / theta;
        ln_plateau + (-ln_eta(v, p).exp()).ln_1p()
    }
}

/// Damping weight `w_theta(u)`; identically 1 for `theta = 0`.
pub fn weight<T: Real>(u: T, theta: T, p: T) -> T {
    ln_weight(u, theta, p).exp()
}

/// `ln W_theta(u)` for `u in [0, 1/2]`.
fn ln_lower_mass<T: Real>(u: T, theta: T, p: T) -> T {
    if theta == T::zero() {
        return u.ln();
    }
    let half = T::lit(0.5);
    let ln_scale = -(T::one() - theta).ln();
    if u >= theta {
        ln_scale + (u - half * theta).ln()
    } else if u <= half * theta {
        if u <= T::zero() {
            T::neg_infinity()
        } else {
            ln_scale + theta.ln() + ln_eta_mass(u / theta, p)
        }
    } else {
        let v = T::one() - u / theta;
        ln_scale + (u - half * theta + theta * ln_eta_mass(v, p).exp()).ln()
    }
}

/// `W_theta(u) = int_0^u w_theta`, a continuous CDF on `[0, 1]` with
/// `W(1/2) = 1/2` and `W(u) + W(1 - u) = 1`.
pub fn weight_cdf<T: Real>(u: T, theta: T, p: T) -> Result<T> {
    if !(u >= T::zero() && u <= T::one()) {
        return domain(format!("weight_cdf argument {u} outside [0, 1]"));
    }
    let half = T::lit(0.5);
    Ok(if u <= half {
        ln_lower_mass(u, theta, p).exp()
    } else {
        T::one() - ln_lower_mass(T::one() - u, theta, p).exp()
    })
}

/// Transport map `T(u) = Phi^{-1}(W_theta(u))`.
///
/// Both halves are evaluated through the lower tail mass in log form, so
/// heavily damped coordinates map to large finite values instead of
/// saturating at the quantile's domain boundary.
pub fn transport<T: Real, D: Density<T>>(u: T, theta: T, p: T, dist: &D) -> Result<T> {
    if !(u > T::zero() && u < T::one()) {
        return domain(format!("transport argument {u} outside (0, 1)"));
    }
    Ok(transport_unchecked(u, theta, p, dist))
}

#[inline]
fn transport_unchecked<T: Real, D: Density<T>>(u: T, theta: T, p: T, dist: &D) -> T {
    let half = T::lit(0.5);
    if u == half {
        T::zero()
    } else if u < half {
        -dist.upper_quantile_ln(ln_lower_mass(u, theta, p))
    } else {
        dist.upper_quantile_ln(ln_lower_mass(T::one() - u, theta, p))
    }
}

/// Per-coordinate damping parameters, bump smoothness and target density.
#[derive(Clone, Debug)]
pub struct BdisTransform<T, D> {
    thetas: Vec<T>,
    p: T,
    dist: D,
}

impl<T: Real, D: Density<T>> BdisTransform<T, D> {
    pub fn new(thetas: Vec<T>, p: T, dist: D) -> Result<Self> {
        if !(p >= T::one()) {
            return domain(format!("bump smoothness p must be >= 1, got {p}"));
        }
        if let Some((j, th)) = thetas.iter().enumerate().find(|(_, &th)| !(th >= T::zero() && th <= T::lit(0.5))) {
            return domain(format!("theta_{} = {th} outside [0, 1/2]", j + 1));
        }
        Ok(Self { thetas, p, dist })
    }

    /// Plain inversion in `s` dimensions (all `theta_j = 0`).
    pub fn inversion(s: usize, dist: D) -> Self {
        Self { thetas: vec![T::zero(); s], p: T::one(), dist }
    }

    pub fn dim(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[T] {
        &self.thetas
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn dist(&self) -> &D {
        &self.dist
    }

    /// Maps `u` into `x` and returns the log likelihood ratio
    /// `sum_j ln w_{theta_j}(u_j)`, short-circuiting to `-inf` on the first
    /// vanishing factor (in which case `x` is left partially written).
    pub fn apply(&self, u: &[T], x: &mut [T]) -> Result<T> {
        if u.len() != self.thetas.len() || x.len() != self.thetas.len() {
            return domain(format!("point has {} coordinates, transform expects {}", u.len(), self.thetas.len()));
        }
        let mut log_w = T::zero();
        for (j, (&uj, &th)) in u.iter().zip(&self.thetas).enumerate() {
            if !(uj > T::zero() && uj < T::one()) {
                return domain(format!("coordinate {} = {uj} outside (0, 1)", j + 1));
            }
            let lw = ln_weight(uj, th, self.p);
            if lw == T::neg_infinity() {
                return Ok(T::neg_infinity());
            }
            log_w = log_w + lw;
            x[j] = transport_unchecked(uj, th, self.p, &self.dist);
        }
        Ok(log_w)
    }
}

/// Which branch of the damping schedule applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `beta == tau`, growth exponent `q* in (1, 2]`.
    BetaEqTauSmallQ,
    /// `beta == tau`, `q* > 2`.
    BetaEqTauLargeQ,
    /// `beta > tau`, decay `rho in (1, 3/2)`.
    BetaGtTauSlow,
    /// `beta > tau`, `rho >= 3/2`: no damping, plain inversion.
    BetaGtTauInversion,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::BetaEqTauSmallQ => "beta-eq-tau-small-q",
            Regime::BetaEqTauLargeQ => "beta-eq-tau-large-q",
            Regime::BetaGtTauSlow => "beta-gt-tau-slow",
            Regime::BetaGtTauInversion => "beta-gt-tau-inversion",
        }
    }
}

/// Inputs of the damping schedule planner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleInput<T> {
    /// Shape of the coordinate density.
    pub beta: T,
    /// Growth exponent of the integrand envelope `exp(sum alpha_j |x_j|^tau)`.
    pub tau: T,
    /// `max_j alpha_j`.
    pub alpha_inf: T,
    /// Decay of the coordinate importances, `b_j = O(j^{-rho_star})`.
    pub rho_star: T,
    /// Order-dependent exponent of the POD weights.
    pub sigma: T,
    pub theta0: T,
    /// Drop the `(|v|!)^sigma` factor, i.e. use `rho = rho_star`.
    pub omit_factorial: bool,
}

/// Resolved damping schedule `theta_j = theta0 * j^{-exponent}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulePlan<T> {
    /// Dimension-independent MSE exponent: MSE ~ `n^{-1 - alpha_star}`.
    pub alpha_star: T,
    /// Largest admissible integrability exponent; `None` when unbounded.
    pub q_star: Option<T>,
    pub rho: T,
    pub exponent: T,
    pub theta0: T,
    pub regime: Regime,
}

/// `alpha* = (rho q - 2) / (rho q + 1)` for `q in (1, 2]`.
///
/// Generic over any numeric field so it can be checked in exact rational
/// arithmetic.
pub fn alpha_star_moderate<N>(rho: N, q: N) -> N
where
    N: num_traits::Num + Copy,
{
    let one = N::one();
    let two = one + one;
    (rho * q - two) / (rho * q + one)
}

/// `alpha*` for `q > 2`: the root in `(0, 1)` of
/// `(q-2) a^2 - (2 q rho - q + 4) a + 2 q (rho - 1)`, in closed form.
pub fn alpha_star_large_q<T: Real>(rho: T, q: T) -> T {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let eight = T::lit(8.0);
    let b = (two * rho - three) * q + eight;
    let disc = (b * b + T::lit(24.0) * (q - two)).sqrt();
    T::one() - (disc - b) / (two * (q - two))
}

/// Selects the damping schedule from the decay and growth parameters.
pub fn plan_schedule<T: Real>(input: &ScheduleInput<T>) -> Result<SchedulePlan<T>> {
    let ScheduleInput { beta, tau, alpha_inf, rho_star, sigma, theta0, omit_factorial } = *input;
    let cfg = |msg: String| Err(Error::Config(msg));
    if !(theta0 > T::zero() && theta0 < T::lit(0.5)) {
        return cfg(format!("theta0 must lie in (0, 1/2), got {theta0}"));
    }
    if !(tau > T::zero()) || tau > beta {
        return cfg(format!("0 < tau <= beta required, got tau = {tau}, beta = {beta}"));
    }
    if !(alpha_inf >= T::zero()) {
        return cfg(format!("alpha_inf >= 0 required, got {alpha_inf}"));
    }
    let rho = if omit_factorial { rho_star } else { rho_star - sigma };
    if !(rho > T::one()) {
        return cfg(format!("rho > 1 required, got rho = {rho}"));
    }
    let half = T::lit(1.5);
    let two = T::lit(2.0);
    if tau == beta {
        let ba = beta * alpha_inf;
        if !(ba < T::one()) {
            return cfg(format!("beta*alpha_inf < 1 required, got {ba}"));
        }
        if !(rho > two * ba) {
            return cfg(format!("rho > 2*beta*alpha_inf required, got rho = {rho}, 2*beta*alpha_inf = {}", two * ba));
        }
        let q = ba.recip();
        if q <= two {
            Ok(SchedulePlan {
                alpha_star: alpha_star_moderate(rho, q),
                q_star: Some(q),
                rho,
                exponent: rho * q,
                theta0,
                regime: Regime::BetaEqTauSmallQ,
            })
        } else {
            let a = alpha_star_large_q(rho, q);
            Ok(SchedulePlan {
                alpha_star: a,
                q_star: Some(q),
                rho,
                exponent: two * rho / (two * a / q + T::one() - a),
                theta0,
                regime: Regime::BetaEqTauLargeQ,
            })
        }
    } else if rho < half {
        Ok(SchedulePlan {
            alpha_star: two * rho - two,
            q_star: None,
            rho,
            exponent: two * rho / (T::lit(3.0) - two * rho),
            theta0,
            regime: Regime::BetaGtTauSlow,
        })
    } else {
        Ok(SchedulePlan {
            alpha_star: T::one(),
            q_star: None,
            rho,
            exponent: T::zero(),
            theta0,
            regime: Regime::BetaGtTauInversion,
        })
    }
}

impl<T: Real> SchedulePlan<T> {
    /// `theta_j` for `j = 1..=s`.
    pub fn thetas(&self, s: usize) -> Vec<T> {
        if self.regime == Regime::BetaGtTauInversion {
            return vec![T::zero(); s];
        }
        power_schedule(self.theta0, self.exponent, s)
    }
}

/// `theta_j = theta0 * j^{-exponent}` for `j = 1..=s`, clipped into `[0, 1/2)`.
pub fn power_schedule<T: Real>(theta0: T, exponent: T, s: usize) -> Vec<T> {
    let clip = T::lit(THETA_CLIP);
    (1..=s)
        .map(|j| {
            let th = theta0 * T::from_usize_lossy(j).powf(-exponent);
            if th > clip {
                warn!("theta_{j} = {th} exceeds 1/2; clipped to {clip}");
                clip
            } else {
                th.max(T::zero())
            }
        })
        .collect()
}
