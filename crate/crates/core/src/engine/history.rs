use super::AllocationPlan;
use crate::error::{config, Error, Result};
use crate::stats::log_mean_exp;
use serde::{Deserialize, Serialize};

/// What the variance estimators need from the final generation.
pub trait TerminalView {
    type State;

    fn plan(&self) -> &AllocationPlan;

    /// `N_0..N_n`.
    fn counts(&self) -> &[usize];

    fn horizon(&self) -> usize {
        self.counts().len() - 1
    }

    fn terminal_states(&self) -> &[Self::State];

    /// `E_n^i`, indices into generation 0.
    fn terminal_eves(&self) -> &[usize];

    /// `ln G_n(ζ_n^i)`.
    fn terminal_log_potentials(&self) -> &[f64];

    /// `ln γ_n^N(1) = Σ_{p<n} ln η_p^N(G_p)`.
    fn log_gamma_one(&self) -> f64;
}

/// Complete record of a particle filter run.
#[derive(Clone, Debug)]
pub struct ParticleHistory<S> {
    pub(crate) plan: AllocationPlan,
    pub(crate) counts: Vec<usize>,
    pub(crate) states: Vec<Vec<S>>,
    /// `ancestors[p][i]` is `A_p^i`: the generation-`p` parent of particle `i` at `p + 1`.
    pub(crate) ancestors: Vec<Vec<usize>>,
    pub(crate) eves: Vec<Vec<usize>>,
    pub(crate) log_potentials: Vec<Vec<f64>>,
    /// `ln η_p^N(G_p)` for `p = 0..=n`.
    pub(crate) log_mean_potentials: Vec<f64>,
}

impl<S> ParticleHistory<S> {
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn horizon(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn plan(&self) -> &AllocationPlan {
        &self.plan
    }

    pub fn states(&self, p: usize) -> &[S] {
        &self.states[p]
    }

    /// `A_p`, for `p < n`.
    pub fn ancestors(&self, p: usize) -> &[usize] {
        &self.ancestors[p]
    }

    pub fn eves(&self, p: usize) -> &[usize] {
        &self.eves[p]
    }

    pub fn log_potentials(&self, p: usize) -> &[f64] {
        &self.log_potentials[p]
    }

    /// `ln η_p^N(G_p)`.
    pub fn log_mean_potential(&self, p: usize) -> f64 {
        self.log_mean_potentials[p]
    }

    /// `ln Π_{q<p} η_q^N(G_q)`, i.e. `ln γ_p^N(1)`.
    pub fn log_gamma_one_at(&self, p: usize) -> f64 {
        self.log_mean_potentials[..p].iter().sum()
    }

    /// Builds a history from a prescribed genealogy, recomputing the Eve indices.
    ///
    /// Meant for tests and for replaying serialized runs.
    pub fn replay(
        counts: Vec<usize>,
        states: Vec<Vec<S>>,
        ancestors: Vec<Vec<usize>>,
        log_potentials: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let plan = AllocationPlan::from_counts(&counts)?;
        let n = counts.len() - 1;
        if states.len() != n + 1 || log_potentials.len() != n + 1 || ancestors.len() != n {
            return config("replayed history has inconsistent lengths");
        }
        for p in 0..=n {
            if states[p].len() != counts[p] || log_potentials[p].len() != counts[p] {
                return config(format!("generation {p} does not hold N_{p} = {} entries", counts[p]));
            }
            if let Some(lg) = log_potentials[p].iter().find(|lg| !lg.is_finite()) {
                return Err(Error::Numeric { step: p, detail: format!("log-potential {lg}") });
            }
        }
        for p in 0..n {
            if ancestors[p].len() != counts[p + 1] {
                return config(format!("A_{p} must have N_{} entries", p + 1));
            }
            if ancestors[p].iter().any(|&a| a >= counts[p]) {
                return config(format!("A_{p} references a particle outside generation {p}"));
            }
        }
        let mut eves = Vec::with_capacity(n + 1);
        eves.push((0..counts[0]).collect::<Vec<_>>());
        for p in 0..n {
            let next: Vec<usize> = ancestors[p].iter().map(|&a| eves[p][a]).collect();
            eves.push(next);
        }
        let log_mean_potentials = log_potentials.iter().map(|lg| log_mean_exp(lg)).collect();
        Ok(Self { plan, counts, states, ancestors, eves, log_potentials, log_mean_potentials })
    }

    /// Drops everything but the last generation.
    pub fn into_terminal(mut self) -> TerminalHistory<S> {
        let log_gamma_one = self.log_gamma_one_at(self.horizon());
        TerminalHistory {
            plan: self.plan,
            counts: self.counts,
            states: self.states.pop().unwrap(),
            eves: self.eves.pop().unwrap(),
            log_potentials: self.log_potentials.pop().unwrap(),
            log_gamma_one,
        }
    }
}

impl<S> TerminalView for ParticleHistory<S> {
    type State = S;

    fn plan(&self) -> &AllocationPlan {
        &self.plan
    }

    fn counts(&self) -> &[usize] {
        &self.counts
    }

    fn terminal_states(&self) -> &[S] {
        self.states.last().unwrap()
    }

    fn terminal_eves(&self) -> &[usize] {
        self.eves.last().unwrap()
    }

    fn terminal_log_potentials(&self) -> &[f64] {
        self.log_potentials.last().unwrap()
    }

    fn log_gamma_one(&self) -> f64 {
        self.log_gamma_one_at(self.horizon())
    }
}

/// The final generation of a run together with its Eve indices; enough for
/// `V_n^N` and the point estimates, in `O(N_n + N_0)` memory.
#[derive(Clone, Debug)]
pub struct TerminalHistory<S> {
    pub(crate) plan: AllocationPlan,
    pub(crate) counts: Vec<usize>,
    pub(crate) states: Vec<S>,
    pub(crate) eves: Vec<usize>,
    pub(crate) log_potentials: Vec<f64>,
    pub(crate) log_gamma_one: f64,
}

impl<S> TerminalView for TerminalHistory<S> {
    type State = S;

    fn plan(&self) -> &AllocationPlan {
        &self.plan
    }

    fn counts(&self) -> &[usize] {
        &self.counts
    }

    fn terminal_states(&self) -> &[S] {
        &self.states
    }

    fn terminal_eves(&self) -> &[usize] {
        &self.eves
    }

    fn terminal_log_potentials(&self) -> &[f64] {
        &self.log_potentials
    }

    fn log_gamma_one(&self) -> f64 {
        self.log_gamma_one
    }
}

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// Serialized form of a run over real-valued states.
///
/// All indices are 0-based. `ancestors[p][i]` is the generation-`p` parent of
/// particle `i` in generation `p + 1`; `eves[p][i]` is the generation-0
/// ancestor of particle `i` in generation `p`; `log_potentials[p][i]` is
/// `ln G_p` at that particle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryBundle {
    pub schema_version: u32,
    pub base_size: usize,
    pub weights: Vec<f64>,
    pub counts: Vec<usize>,
    pub ancestors: Vec<Vec<usize>>,
    pub eves: Vec<Vec<usize>>,
    pub states: Vec<Vec<f64>>,
    pub log_potentials: Vec<Vec<f64>>,
}

impl HistoryBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl ParticleHistory<f64> {
    pub fn to_bundle(&self) -> HistoryBundle {
        HistoryBundle {
            schema_version: BUNDLE_SCHEMA_VERSION,
            base_size: self.plan.base_size,
            weights: self.plan.weights.clone(),
            counts: self.counts.clone(),
            ancestors: self.ancestors.clone(),
            eves: self.eves.clone(),
            states: self.states.clone(),
            log_potentials: self.log_potentials.clone(),
        }
    }

    /// Replays a bundle, checking that its Eve indices agree with its ancestors.
    pub fn from_bundle(bundle: &HistoryBundle) -> Result<Self> {
        if bundle.schema_version != BUNDLE_SCHEMA_VERSION {
            return config(format!("unsupported bundle schema version {}", bundle.schema_version));
        }
        let mut history = Self::replay(
            bundle.counts.clone(),
            bundle.states.clone(),
            bundle.ancestors.clone(),
            bundle.log_potentials.clone(),
        )?;
        if history.eves != bundle.eves {
            return config("bundle Eve indices disagree with its ancestor indices");
        }
        let plan = AllocationPlan::new(bundle.base_size, bundle.weights.clone())?;
        if plan.counts() != bundle.counts {
            return config("bundle counts disagree with its allocation plan");
        }
        history.plan = plan;
        Ok(history)
    }
}
