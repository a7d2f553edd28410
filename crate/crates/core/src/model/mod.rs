//! Feynman–Kac models.
//!
//! A model is a horizon `n`, an initial distribution `M_0`, Markov kernels
//! `M_1..M_n` and strictly positive, bounded potentials `G_0..G_n`. It defines
//! the unnormalized measures `γ_p` through `γ_p(S) = ∫ γ_{p-1}(dx) G_{p-1}(x) M_p(x, S)`
//! with `γ_0 = M_0`, and their normalized versions `η_p = γ_p / γ_p(1)`.
//!
//! Potentials are exchanged in log space. Models are immutable; the random
//! number generator is always passed in.

mod adapted;
mod lgssm;
mod sv;
mod tempered;

pub use adapted::{make_fully_adapted, FullyAdaptable, FullyAdapted};
pub use lgssm::{make_lgssm, Lgssm, LgssmParams};
pub use sv::{make_sv, StochasticVolatility, SvParams};
pub use tempered::{
    acceptance_probability, make_tempered_sampler, metropolis_step, Gaussian1d, GaussianMixture, LogDensity,
    MixtureComponent, TemperedSampler, TemperedSamplerParams,
};

use crate::error::{Error, Result};
use rand::Rng;

/// A Feynman–Kac model over an opaque state type.
pub trait FeynmanKac: Sync {
    type State: Clone + Send + Sync;

    /// The final time index `n`; the model has `n + 1` potentials.
    fn horizon(&self) -> usize;

    /// Draw from `M_0`.
    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    /// Draw from `M_step(from, ·)` for `step` in `1..=n`.
    fn sample_transition<R: Rng + ?Sized>(&self, step: usize, from: &Self::State, rng: &mut R) -> Self::State;

    /// `ln G_step(state)` for `step` in `0..=n`.
    fn log_potential(&self, step: usize, state: &Self::State) -> f64;

    /// Upper bound on `ln G_step`, when one is known.
    fn log_potential_bound(&self, _step: usize) -> Option<f64> {
        None
    }
}

/// Evaluates `ln G_step(state)`, rejecting zero, infinite, NaN and out-of-bound values.
pub fn checked_log_potential<M: FeynmanKac>(model: &M, step: usize, state: &M::State) -> Result<f64> {
    let lg = model.log_potential(step, state);
    if lg.is_nan() || lg == f64::INFINITY {
        return Err(Error::Numeric { step, detail: format!("log-potential evaluated to {lg}") });
    }
    if lg == f64::NEG_INFINITY {
        return Err(Error::Numeric { step, detail: "potential vanished; potentials must be strictly positive".into() });
    }
    if let Some(bound) = model.log_potential_bound(step) {
        if lg > bound + 1e-9 * bound.abs().max(1.0) {
            return Err(Error::Numeric {
                step,
                detail: format!("log-potential {lg} exceeds the declared bound {bound}"),
            });
        }
    }
    Ok(lg)
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        crate::error::config(format!("{name} must be positive and finite, got {value}"))
    }
}

pub(crate) fn check_observations(obs: &[f64]) -> Result<()> {
    if obs.is_empty() {
        return crate::error::config("observation sequence is empty");
    }
    if let Some((i, y)) = obs.iter().enumerate().find(|(_, y)| !y.is_finite()) {
        return crate::error::config(format!("observation {i} is not finite ({y})"));
    }
    Ok(())
}
