//! Sequential Monte Carlo with genealogy tracking and single-run variance
//! estimation.
//!
//! A particle filter run records, besides the usual states and ancestor
//! indices, the *Eve index* of every particle: the index of its time-0
//! ancestor. From one such run the [`varest`] module computes
//!
//! - an unbiased estimator of the relative variance of the normalizing-constant
//!   estimate `γ_n^N(φ)` and its `N`-scaled consistent counterpart,
//! - the per-timestep terms `v_{p,n}` of the asymptotic variance,
//! - the same quantities for the updated (filtering) measures,
//! - an asymptotic bias estimate for `η_n^N(φ)`.
//!
//! [`oracle`] holds independent ground truth: exhaustive enumeration of the
//! genealogical tracing variables for tiny particle systems and closed forms
//! for linear Gaussian models. [`tuning`] turns the estimators into particle
//! allocation and adaptive-`N` procedures.
//!
//! Particle indices are 0-based throughout.

pub mod engine;
pub mod error;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod tuning;
pub mod varest;

pub use engine::{
    multinomial_resample, run_filter, run_filter_terminal, AllocationPlan, HistoryBundle, ParticleHistory,
    TerminalHistory, TerminalView,
};
pub use error::{Error, Result};
pub use model::{FeynmanKac, FullyAdaptable};
pub use varest::{Measure, VarianceReport};
