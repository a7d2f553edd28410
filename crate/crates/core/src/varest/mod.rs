//! Single-run variance estimators.
//!
//! Everything here is a pure function of a finished run. Pair sums over
//! particles with distinct Eve indices are evaluated through per-family sums,
//! and the time-`p` coincidence measures through a single backward sweep over
//! the ancestor arrays, so no routine is quadratic in the particle number.
//!
//! Estimates are reported as computed: `V_n^N` and `v_{p,n}^N` can be
//! negative in finite samples and are never clipped.
//!
//! Measures carrying a factor `γ_n^N(1)²` are returned as
//! [`MeasureEstimate`], holding the ratio to `γ_n^N(1)²` and `ln γ_n^N(1)`
//! separately; the ratio is what the variance formulas use and stays in range
//! when `γ_n^N(1)` itself under- or overflows.

mod coalescence;
mod diagnostics;
mod pairs;
mod report;
mod updated;

pub use coalescence::{bias_estimate, compute_mu_ep, compute_vn, compute_vpn, compute_vpn_all, mu_e_normalized};
pub use diagnostics::{family_diagnostics, terminal_family_diagnostics, FamilyDiagnostics};
pub use pairs::{compute_mu0n, compute_v, distinct_eve_cross_sum, mu0_normalized, v_from_values};
pub use report::{estimate, estimate_terminal, Decomposition, VarianceReport, REPORT_SCHEMA_VERSION};
pub use updated::{
    chan_lai_estimator, chan_lai_via_v_hat, compute_v_hat, updated_estimators, updated_values, UpdatedEstimates,
};

use crate::engine::TerminalView;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which final-time measure a procedure targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    /// `γ_n`, `η_n`.
    #[default]
    Predictive,
    /// `γ̂_n = G_n · γ_n`, `η̂_n`.
    Updated,
}

/// A particle approximation of a measure on pairs, `μ^N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureEstimate {
    /// `μ^N / γ_n^N(1)²`.
    pub normalized: f64,
    /// `ln γ_n^N(1)`.
    pub log_gamma_one: f64,
}

impl MeasureEstimate {
    pub fn value(&self) -> f64 {
        self.normalized * (2.0 * self.log_gamma_one).exp()
    }
}

/// `φ(ζ_n^i)` for every terminal particle.
pub fn terminal_values<V: TerminalView>(view: &V, phi: impl Fn(&V::State) -> f64) -> Result<Vec<f64>> {
    view.terminal_states()
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let value = phi(x);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(Error::NonFiniteTestFunction { index, value })
            }
        })
        .collect()
}

/// `Π_{p<upto} N_p / (N_p - 1)`.
pub(crate) fn resampling_correction(counts: &[usize], upto: usize) -> f64 {
    counts[..upto].iter().map(|&c| c as f64 / (c as f64 - 1.0)).product()
}

pub(crate) fn centered(values: &[f64], center: f64) -> Vec<f64> {
    values.iter().map(|v| v - center).collect()
}
