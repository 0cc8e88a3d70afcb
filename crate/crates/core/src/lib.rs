//! Boundary-damping importance sampling (BDIS) for randomized quasi-Monte
//! Carlo integration over `R^s`.
//!
//! The integral `mu = E[f(X)]` with i.i.d. coordinates drawn from a symmetric
//! light-tailed density is estimated as
//!
//! ```text
//! mu_hat = (1/n) * sum_i w(u_i) * f(T(u_i))
//! ```
//!
//! where the `u_i` are Owen-scrambled Sobol' points, `T` is a per-coordinate
//! transport map and `w` a product weight that vanishes smoothly at the faces
//! of the unit cube. All numerics are generic over [`Real`]; the aliases at
//! the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bdis;
pub mod dists;
pub mod error;
pub mod estimator;
pub mod net;
pub mod pde;
pub mod quad;
pub mod scalar;
pub mod special;
pub mod testfuncs;

pub use error::{Error, Result};
pub use scalar::Real;

/// Generalized beta-Gaussian law in double precision.
pub type BetaGaussian = dists::BetaGaussian<f64>;
/// BDIS transform over the beta-Gaussian family in double precision.
pub type BdisTransform = bdis::BdisTransform<f64, BetaGaussian>;
/// Schedule plan in double precision.
pub type SchedulePlan = bdis::SchedulePlan<f64>;
/// Closed-form test integrand in double precision.
pub type IntegrandSpec = testfuncs::IntegrandSpec<f64>;
/// Study method in double precision.
pub type Method = estimator::Method<f64, BetaGaussian>;
/// Convergence report in double precision.
pub type ConvergenceReport = estimator::ConvergenceReport<f64>;
/// Random-field description in double precision.
pub type RandomFieldSpec = pde::RandomFieldSpec<f64>;
