use crate::engine::{run_filter, AllocationPlan};
use crate::error::{config, Result};
use crate::model::FeynmanKac;
use crate::varest::compute_vpn_all;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Minimizer of `Σ_p a_p / c_p` subject to `Σ_p c_p = n + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalAllocation {
    /// `c_p ∝ √a_p`; zero where `a_p = 0`.
    pub weights: Vec<f64>,
    /// `(n+1)^{-1} (Σ_p √a_p)²`.
    pub objective: f64,
}

pub fn optimal_allocation(a: &[f64]) -> Result<OptimalAllocation> {
    if a.is_empty() || a.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return config("allocation targets must be finite and non-negative");
    }
    let roots: Vec<f64> = a.iter().map(|v| v.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    if total == 0.0 {
        return config("allocation targets are all zero");
    }
    let len = a.len() as f64;
    Ok(OptimalAllocation { weights: roots.iter().map(|r| len * r / total).collect(), objective: total * total / len })
}

/// How stage-one estimates `v_{p,n}^N` become unnormalized weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationRule {
    /// `c_p = max{v_{p,n}^N, g(N)}^{1/2}`, the plug-in for `c_p ∝ √v_{p,n}`.
    #[default]
    SquareRoot,
    /// `c_p = max{v_{p,n}^N, g(N)}`.
    Linear,
}

/// `g(N) = 2 / log₂ N`.
pub fn default_floor(base_size: usize) -> f64 {
    2.0 / (base_size as f64).log2()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStageOptions {
    #[serde(default)]
    pub rule: AllocationRule,
    /// Overrides [`default_floor`].
    #[serde(default)]
    pub floor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub plan: AllocationPlan,
    /// `v_{p,n}^N(φ)` from the constant-`N` first stage.
    pub stage_one_vpn: Vec<f64>,
    /// `Σ_p v_{p,n}^N / Σ_p c_p^{-1} v_{p,n}^N`.
    pub predicted_improvement: f64,
    pub floor: f64,
}

/// Runs a constant-`N` filter and derives the allocation `N_p = ⌈c_p N⌉` from its `v_{p,n}^N(φ)`,
/// with the floored weights rescaled to `Σ_p c_p = n + 1`.
pub fn two_stage_allocation<M: FeynmanKac, R: Rng + ?Sized>(
    model: &M,
    phi: impl Fn(&M::State) -> f64,
    base_size: usize,
    options: TwoStageOptions,
    rng: &mut R,
) -> Result<TwoStageResult> {
    let n = model.horizon();
    let floor = options.floor.unwrap_or_else(|| default_floor(base_size));
    if !(floor > 0.0 && floor.is_finite()) {
        return config(format!("allocation floor must be positive, got {floor}"));
    }
    let history = run_filter(model, &AllocationPlan::constant(n, base_size)?, rng)?;
    let vpn = compute_vpn_all(&history, phi)?;
    let raw: Vec<f64> = vpn
        .iter()
        .map(|&v| match options.rule {
            AllocationRule::SquareRoot => v.max(floor).sqrt(),
            AllocationRule::Linear => v.max(floor),
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|c| c * (n + 1) as f64 / total).collect();
    let plan = AllocationPlan::new(base_size, weights)?;
    let predicted_improvement =
        vpn.iter().sum::<f64>() / vpn.iter().zip(&plan.weights).map(|(v, c)| v / c).sum::<f64>();
    Ok(TwoStageResult { plan, stage_one_vpn: vpn, predicted_improvement, floor })
}
