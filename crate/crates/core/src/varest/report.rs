use super::coalescence::{bias_from_values, vn_from_terms, vpn_from_values};
use super::pairs::v_from_values;
use super::updated::{chan_lai_estimator, updated_values};
use super::{centered, terminal_values};
use crate::engine::{point_from_values, ParticleHistory, PointEstimates, TerminalView};
use crate::error::Result;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Every single-run estimate for one test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceReport {
    pub schema_version: u32,
    pub horizon: usize,
    /// `N`; scaled quantities are multiplied by it.
    pub base_size: usize,
    pub point: PointEstimates,
    /// `V_n^N(φ)`.
    pub v: f64,
    /// `N · V_n^N(φ)`.
    pub scaled_v: f64,
    /// `N · V_n^N(φ - η_n^N(φ))`.
    pub scaled_v_centered: f64,
    /// `V̂_n^N(φ)`.
    pub v_hat: f64,
    /// Present for a constant particle number.
    pub chan_lai: Option<f64>,
    /// Present when the run kept its full ancestry.
    pub decomposition: Option<Decomposition>,
}

/// Per-timestep terms; require the full ancestor arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decomposition {
    /// `v_{p,n}^N(φ)`, `p = 0..=n`.
    pub vpn: Vec<f64>,
    /// `Σ_p c_p^{-1} v_{p,n}^N(φ)`.
    pub vn: f64,
    pub vpn_hat: Vec<f64>,
    pub vn_hat: f64,
    /// Present for a constant particle number.
    pub bias: Option<f64>,
}

fn terminal_part<V: TerminalView>(view: &V, values: &[f64]) -> VarianceReport {
    let counts = view.counts();
    let eves = view.terminal_eves();
    let point = point_from_values(view, values);
    let n = view.plan().base_size as f64;
    let v = v_from_values(counts, eves, values);
    VarianceReport {
        schema_version: REPORT_SCHEMA_VERSION,
        horizon: view.horizon(),
        base_size: view.plan().base_size,
        point,
        v,
        scaled_v: n * v,
        scaled_v_centered: n * v_from_values(counts, eves, &centered(values, point.eta)),
        v_hat: v_from_values(counts, eves, &updated_values(view, values)),
        chan_lai: None,
        decomposition: None,
    }
}

/// Report without the per-timestep decomposition, from terminal data only.
pub fn estimate_terminal<V: TerminalView>(view: &V, phi: impl Fn(&V::State) -> f64) -> Result<VarianceReport> {
    let values = terminal_values(view, &phi)?;
    let mut report = terminal_part(view, &values);
    if view.plan().is_constant() {
        report.chan_lai = Some(chan_lai_estimator(view, &phi)?);
    }
    Ok(report)
}

/// Full report.
pub fn estimate<S>(h: &ParticleHistory<S>, phi: impl Fn(&S) -> f64) -> Result<VarianceReport> {
    let mut report = estimate_terminal(h, &phi)?;
    let values = terminal_values(h, &phi)?;
    let weights = &h.plan().weights;
    let vpn = vpn_from_values(h, &values);
    let vpn_hat = vpn_from_values(h, &updated_values(h, &values));
    report.decomposition = Some(Decomposition {
        vn: vn_from_terms(weights, &vpn),
        vn_hat: vn_from_terms(weights, &vpn_hat),
        vpn,
        vpn_hat,
        bias: h.plan().is_constant().then(|| bias_from_values(h, &values)),
    });
    Ok(report)
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_optional(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

impl VarianceReport {
    /// `γ_n^N(φ)`.
    pub fn gamma(&self) -> f64 {
        self.point.gamma()
    }

    /// Column names of a flat CSV row for a run with the given horizon.
    pub fn csv_header(horizon: usize) -> Vec<String> {
        let mut h: Vec<String> = [
            "schema_version",
            "horizon",
            "base_size",
            "log_gamma_one",
            "eta",
            "log_gamma_hat_one",
            "eta_hat",
            "v",
            "scaled_v",
            "scaled_v_centered",
            "v_hat",
            "chan_lai",
            "vn",
            "vn_hat",
            "bias",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((0..=horizon).map(|p| format!("v_{p}")));
        h.extend((0..=horizon).map(|p| format!("vhat_{p}")));
        h
    }

    /// Values matching [`Self::csv_header`]; absent entries are empty.
    pub fn csv_record(&self) -> Vec<String> {
        let d = self.decomposition.as_ref();
        let mut r = vec![
            self.schema_version.to_string(),
            self.horizon.to_string(),
            self.base_size.to_string(),
            format_float(self.point.log_gamma_one),
            format_float(self.point.eta),
            format_float(self.point.log_gamma_hat_one),
            format_float(self.point.eta_hat),
            format_float(self.v),
            format_float(self.scaled_v),
            format_float(self.scaled_v_centered),
            format_float(self.v_hat),
            format_optional(self.chan_lai),
            format_optional(d.map(|d| d.vn)),
            format_optional(d.map(|d| d.vn_hat)),
            format_optional(d.and_then(|d| d.bias)),
        ];
        for p in 0..=self.horizon {
            r.push(format_optional(d.map(|d| d.vpn[p])));
        }
        for p in 0..=self.horizon {
            r.push(format_optional(d.map(|d| d.vpn_hat[p])));
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
