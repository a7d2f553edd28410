use crate::engine::point_estimates;
use crate::engine::{run_filter, run_filter_terminal, AllocationPlan, ParticleHistory, TerminalHistory};
use crate::error::{config, Result};
use crate::model::FeynmanKac;
use crate::rng::child;
use crate::varest::{compute_v, compute_v_hat, Measure};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Runs `count` independent terminal-only filters, replicate `i` on stream `child(seed, i)`,
/// and maps each through `f`. Results are in replicate order.
pub fn replicate_terminal<M, T, F>(model: &M, plan: &AllocationPlan, count: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    M: FeynmanKac,
    T: Send,
    F: Fn(usize, TerminalHistory<M::State>) -> Result<T> + Sync,
{
    (0..count).into_par_iter().map(|i| f(i, run_filter_terminal(model, plan, &mut child(seed, i as u64))?)).collect()
}

/// As [`replicate_terminal`], keeping full ancestries.
pub fn replicate_full<M, T, F>(model: &M, plan: &AllocationPlan, count: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    M: FeynmanKac,
    T: Send,
    F: Fn(usize, ParticleHistory<M::State>) -> Result<T> + Sync,
{
    (0..count).into_par_iter().map(|i| f(i, run_filter(model, plan, &mut child(seed, i as u64))?)).collect()
}

/// Two estimates of `var{γ_n^N(φ)/γ_n(1)}` from `B` independent runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStudy {
    pub replicates: usize,
    /// `ln M`, `M = B^{-1} Σ_i γ_{n,i}^N(1)`.
    pub log_normalizer: f64,
    /// Sample variance of `M^{-1} γ_{n,i}^N(φ)`.
    pub standard: f64,
    /// `B^{-1} Σ_i (M^{-1} γ_{n,i}^N(1))² V_{n,i}^N(φ)`.
    pub v_based: f64,
}

pub fn replicate_variance_study<M: FeynmanKac>(
    model: &M,
    phi: impl Fn(&M::State) -> f64 + Sync,
    plan: &AllocationPlan,
    replicates: usize,
    measure: Measure,
    seed: u64,
) -> Result<ReplicateStudy> {
    if replicates < 2 {
        return config("at least two replicates are required");
    }
    let runs = replicate_terminal(model, plan, replicates, seed, |_, h| {
        let p = point_estimates(&h, &phi)?;
        Ok(match measure {
            Measure::Predictive => (p.log_gamma_one, p.eta, compute_v(&h, &phi)?),
            Measure::Updated => (p.log_gamma_hat_one, p.eta_hat, compute_v_hat(&h, &phi)?),
        })
    })?;
    let logs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let log_normalizer = crate::stats::log_mean_exp(&logs);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - log_normalizer).exp()).collect();
    let ratios: Vec<f64> = scaled.iter().zip(&runs).map(|(s, r)| s * r.1).collect();
    let v_based = scaled.iter().zip(&runs).map(|(s, r)| s * s * r.2).sum::<f64>() / replicates as f64;
    Ok(ReplicateStudy { replicates, log_normalizer, standard: crate::stats::sample_variance(&ratios), v_based })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_lgssm, LgssmParams};

    fn model() -> crate::model::Lgssm {
        make_lgssm(LgssmParams::standard(vec![0.4, -0.3, 1.0])).unwrap()
    }

    #[test]
    fn replicates_are_ordered_and_reproducible() {
        let plan = AllocationPlan::constant(2, 20).unwrap();
        let a = replicate_terminal(&model(), &plan, 8, 4, |i, h| Ok((i, h.log_gamma_one))).unwrap();
        let b = replicate_terminal(&model(), &plan, 8, 4, |i, h| Ok((i, h.log_gamma_one))).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, r)| r.0 == i));
    }

    #[test]
    fn two_replicates_are_defined() {
        let plan = AllocationPlan::constant(2, 10).unwrap();
        let s = replicate_variance_study(&model(), |x| *x, &plan, 2, Measure::Predictive, 0).unwrap();
        assert!(s.standard.is_finite() && s.v_based.is_finite());
        assert!(replicate_variance_study(&model(), |x| *x, &plan, 1, Measure::Predictive, 0).is_err());
    }

    #[test]
    fn both_estimates_agree_roughly() {
        let plan = AllocationPlan::constant(2, 50).unwrap();
        let s = replicate_variance_study(&model(), |_| 1.0, &plan, 4000, Measure::Predictive, 9).unwrap();
        assert!((s.standard / s.v_based - 1.0).abs() < 0.25, "{s:?}");
    }
}
