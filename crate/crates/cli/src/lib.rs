//! Configuration-driven convergence studies for BDIS-weighted RQMC.

pub mod config;
pub mod runner;
