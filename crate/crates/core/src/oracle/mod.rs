//! Independent ground truth.
//!
//! [`enumerate`] computes every `μ_b^N` of a small run exactly by walking
//! the full probability tree of the genealogical tracing variables; it shares
//! no code with the fast estimators. [`kalman`] gives closed forms for
//! linear-Gaussian Feynman-Kac models.

pub mod enumerate;
mod gaussian;
pub mod kalman;

pub use enumerate::{
    brute_force_mu, enumerate_tracing, PairEnumeration, Pattern, PatternMass, PatternValues, TracingEnumeration,
    TracingPath, PATH_LIMIT,
};
pub use gaussian::{GaussianLinear, GaussianPotential};
pub use kalman::{
    exact_bias, exact_sigma2, exact_vpn, exact_vpn_lgssm, kalman_filter, KalmanReference, LinearGaussianFk,
    LinearTransition, TestFunction,
};
