//! Numerical checks of heat-kernel bounds for fractional powers of weighted
//! Kolmogorov operators `A = -D^2 - (log rho)' D` on the line.

pub mod bound_checker;
pub mod cli;
pub mod discretization;
pub mod error;
pub mod fractional_calculus;
pub mod measure_models;
pub mod nash_verifier;
pub mod spectral_engine;
pub mod verification_suite;

pub use error::{Error, Result};
