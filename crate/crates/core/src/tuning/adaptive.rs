use crate::engine::{run_filter_terminal, AllocationPlan, TerminalHistory};
use crate::error::{config, Result};
use crate::model::FeynmanKac;
use crate::rng::child;
use crate::varest::{compute_v, compute_v_hat, estimate_terminal, Measure, VarianceReport};
use serde::{Deserialize, Serialize};

/// Stage `t` uses the stream `child(seed, t)`; the final run uses `child(seed, FINAL_STREAM)`.
const FINAL_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveOptions {
    /// `N^{(0)}`.
    pub initial_size: usize,
    /// `δ`.
    pub threshold: f64,
    #[serde(default = "default_max_doublings")]
    pub max_doublings: usize,
    /// Whether the stopping rule uses `V_n^N` or `V̂_n^N`.
    #[serde(default)]
    pub measure: Measure,
}

fn default_max_doublings() -> usize {
    30
}

impl AdaptiveOptions {
    pub fn new(initial_size: usize, threshold: f64, measure: Measure) -> Self {
        Self { initial_size, threshold, max_doublings: default_max_doublings(), measure }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStage {
    pub stage: usize,
    pub size: usize,
    /// `V_n^N(φ)` or `V̂_n^N(φ)`.
    pub v: f64,
    /// `γ_n^N(φ)` or `γ̂_n^N(φ)`.
    pub estimate: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRunResult {
    pub threshold: f64,
    pub measure: Measure,
    /// `N^{(0)}, …, N^{(τ)}`.
    pub trajectory: Vec<usize>,
    pub stages: Vec<AdaptiveStage>,
    /// False when the doubling cap was reached first; `report` then comes from the last stage.
    pub converged: bool,
    /// From the independent final run at `N^{(τ)}`.
    pub report: VarianceReport,
}

impl AdaptiveRunResult {
    /// `γ_n^N(φ)` or `γ̂_n^N(φ)` from the reported run.
    pub fn estimate(&self) -> f64 {
        match self.measure {
            Measure::Predictive => self.report.point.gamma(),
            Measure::Updated => self.report.point.gamma_hat(),
        }
    }
}

fn stage_value<S>(h: &TerminalHistory<S>, phi: &impl Fn(&S) -> f64, measure: Measure) -> Result<(f64, f64)> {
    let point = crate::engine::point_estimates(h, phi)?;
    Ok(match measure {
        Measure::Predictive => (compute_v(h, phi)?, point.gamma()),
        Measure::Updated => (compute_v_hat(h, phi)?, point.gamma_hat()),
    })
}

/// Doubles `N` from `N^{(0)}` until `V_n^N(φ) ∈ [0, δ]`, then reports an independent run at that size.
pub fn adaptive_filter<M: FeynmanKac>(
    model: &M,
    phi: impl Fn(&M::State) -> f64,
    options: AdaptiveOptions,
    seed: u64,
) -> Result<AdaptiveRunResult> {
    if options.initial_size < 2 {
        return config("the initial particle number must be at least 2");
    }
    if !(options.threshold > 0.0 && options.threshold.is_finite()) {
        return config("the threshold must be positive and finite");
    }
    let n = model.horizon();
    let mut stages = Vec::new();
    let mut size = options.initial_size;
    let mut last = None;
    for stage in 0..=options.max_doublings {
        let plan = AllocationPlan::constant(n, size)?;
        let h = run_filter_terminal(model, &plan, &mut child(seed, stage as u64))?;
        let (v, estimate) = stage_value(&h, &phi, options.measure)?;
        let accepted = (0.0..=options.threshold).contains(&v);
        stages.push(AdaptiveStage { stage, size, v, estimate, accepted });
        if accepted {
            let final_run = run_filter_terminal(model, &plan, &mut child(seed, FINAL_STREAM))?;
            return Ok(AdaptiveRunResult {
                threshold: options.threshold,
                measure: options.measure,
                trajectory: stages.iter().map(|s| s.size).collect(),
                stages,
                converged: true,
                report: estimate_terminal(&final_run, &phi)?,
            });
        }
        last = Some(h);
        if stage < options.max_doublings {
            size = size.checked_mul(2).ok_or_else(|| crate::Error::Config("particle number overflow".into()))?;
        }
    }
    let h = last.expect("at least one stage runs");
    Ok(AdaptiveRunResult {
        threshold: options.threshold,
        measure: options.measure,
        trajectory: stages.iter().map(|s| s.size).collect(),
        stages,
        converged: false,
        report: estimate_terminal(&h, &phi)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_lgssm, LgssmParams};

    fn model() -> crate::model::Lgssm {
        make_lgssm(LgssmParams::standard(vec![0.4, -0.3, 1.0, 0.2, 0.0, -0.5])).unwrap()
    }

    #[test]
    fn huge_threshold_accepts_first_stage() {
        let r = adaptive_filter(&model(), |_| 1.0, AdaptiveOptions::new(50, 1e6, Measure::Predictive), 3).unwrap();
        // V may still be negative at the first stage, in which case doubling continues.
        assert!(r.converged);
        let tau = r.trajectory.len() - 1;
        for (t, &s) in r.trajectory.iter().enumerate() {
            assert_eq!(s, 50 << t);
        }
        assert!(r.stages[tau].accepted);
        assert!(r.stages[..tau].iter().all(|s| s.v < 0.0));
        assert_eq!(r.report.base_size, r.trajectory[tau]);
    }

    #[test]
    fn deterministic_given_seed() {
        let opts = AdaptiveOptions::new(16, 0.05, Measure::Updated);
        let a = adaptive_filter(&model(), |x| *x, opts, 11).unwrap();
        let b = adaptive_filter(&model(), |x| *x, opts, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
        let last = a.stages.last().unwrap();
        assert!(last.v >= 0.0 && last.v <= 0.05);
    }

    #[test]
    fn cap_returns_partial_result() {
        let opts =
            AdaptiveOptions { initial_size: 4, threshold: 1e-12, max_doublings: 2, measure: Measure::Predictive };
        let r = adaptive_filter(&model(), |_| 1.0, opts, 0).unwrap();
        assert!(!r.converged);
        assert_eq!(r.trajectory, vec![4, 8, 16]);
    }

    #[test]
    fn rejects_bad_options() {
        assert!(adaptive_filter(&model(), |_| 1.0, AdaptiveOptions::new(1, 0.1, Measure::Predictive), 0).is_err());
        assert!(adaptive_filter(&model(), |_| 1.0, AdaptiveOptions::new(8, 0.0, Measure::Predictive), 0).is_err());
    }
}
