use super::history::{ParticleHistory, TerminalHistory, TerminalView};
use super::{draw_ancestors, AllocationPlan};
use crate::error::{config, Result};
use crate::model::{checked_log_potential, FeynmanKac};
use crate::stats::{log_mean_exp, relative_weights};
use crate::varest::terminal_values;
use rand::Rng;
use serde::{Deserialize, Serialize};

struct Generation<S> {
    states: Vec<S>,
    eves: Vec<usize>,
    log_potentials: Vec<f64>,
    /// `exp(ln G - max ln G)`.
    relative: Vec<f64>,
    log_mean_potential: f64,
}

struct Weights {
    log_potentials: Vec<f64>,
    relative: Vec<f64>,
    log_mean_potential: f64,
}

fn weigh<M: FeynmanKac>(model: &M, step: usize, states: &[M::State]) -> Result<Weights> {
    let log_potentials = states.iter().map(|x| checked_log_potential(model, step, x)).collect::<Result<Vec<f64>>>()?;
    let relative = relative_weights(&log_potentials);
    let log_mean_potential = log_mean_exp(&log_potentials);
    Ok(Weights { log_potentials, relative, log_mean_potential })
}

fn initial<M: FeynmanKac, R: Rng + ?Sized>(model: &M, count: usize, rng: &mut R) -> Result<Generation<M::State>> {
    let states: Vec<M::State> = (0..count).map(|_| model.sample_initial(rng)).collect();
    let w = weigh(model, 0, &states)?;
    Ok(Generation {
        states,
        eves: (0..count).collect(),
        log_potentials: w.log_potentials,
        relative: w.relative,
        log_mean_potential: w.log_mean_potential,
    })
}

/// Resamples `prev` (generation `step - 1`) and moves the survivors with `M_step`.
fn advance<M: FeynmanKac, R: Rng + ?Sized>(
    model: &M,
    step: usize,
    prev: &Generation<M::State>,
    count: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Generation<M::State>)> {
    let ancestors = draw_ancestors(&prev.relative, count, rng);
    let states: Vec<M::State> =
        ancestors.iter().map(|&a| model.sample_transition(step, &prev.states[a], rng)).collect();
    let eves = ancestors.iter().map(|&a| prev.eves[a]).collect();
    let w = weigh(model, step, &states)?;
    Ok((
        ancestors,
        Generation {
            states,
            eves,
            log_potentials: w.log_potentials,
            relative: w.relative,
            log_mean_potential: w.log_mean_potential,
        },
    ))
}

fn check_horizon<M: FeynmanKac>(model: &M, plan: &AllocationPlan) -> Result<()> {
    plan.validate()?;
    if plan.horizon() != model.horizon() {
        return config(format!(
            "allocation plan covers {} steps but the model has {}",
            plan.horizon() + 1,
            model.horizon() + 1
        ));
    }
    Ok(())
}

/// Runs the particle filter with multinomial resampling and records the full
/// genealogy: states, ancestor indices, Eve indices and log-potentials of
/// every generation.
pub fn run_filter<M: FeynmanKac, R: Rng + ?Sized>(
    model: &M,
    plan: &AllocationPlan,
    rng: &mut R,
) -> Result<ParticleHistory<M::State>> {
    check_horizon(model, plan)?;
    let counts = plan.counts();
    let n = plan.horizon();
    let mut states = Vec::with_capacity(n + 1);
    let mut eves = Vec::with_capacity(n + 1);
    let mut log_potentials = Vec::with_capacity(n + 1);
    let mut log_mean_potentials = Vec::with_capacity(n + 1);
    let mut ancestors = Vec::with_capacity(n);

    let mut current = initial(model, counts[0], rng)?;
    for (step, &count) in counts.iter().enumerate().skip(1) {
        let (a, next) = advance(model, step, &current, count, rng)?;
        ancestors.push(a);
        let done = std::mem::replace(&mut current, next);
        states.push(done.states);
        eves.push(done.eves);
        log_potentials.push(done.log_potentials);
        log_mean_potentials.push(done.log_mean_potential);
    }
    states.push(current.states);
    eves.push(current.eves);
    log_potentials.push(current.log_potentials);
    log_mean_potentials.push(current.log_mean_potential);

    Ok(ParticleHistory { plan: plan.clone(), counts, states, ancestors, eves, log_potentials, log_mean_potentials })
}

/// Runs the same filter keeping only the current generation; returns the
/// final generation with its Eve indices.
pub fn run_filter_terminal<M: FeynmanKac, R: Rng + ?Sized>(
    model: &M,
    plan: &AllocationPlan,
    rng: &mut R,
) -> Result<TerminalHistory<M::State>> {
    check_horizon(model, plan)?;
    let counts = plan.counts();
    let mut log_gamma_one = 0.0;
    let mut current = initial(model, counts[0], rng)?;
    for (step, &count) in counts.iter().enumerate().skip(1) {
        log_gamma_one += current.log_mean_potential;
        current = advance(model, step, &current, count, rng)?.1;
    }
    Ok(TerminalHistory {
        plan: plan.clone(),
        counts,
        states: current.states,
        eves: current.eves,
        log_potentials: current.log_potentials,
        log_gamma_one,
    })
}

/// Particle approximations at the final time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEstimates {
    /// `ln γ_n^N(1)`.
    pub log_gamma_one: f64,
    /// `η_n^N(φ)`.
    pub eta: f64,
    /// `ln γ̂_n^N(1) = ln γ_n^N(G_n)`.
    pub log_gamma_hat_one: f64,
    /// `η̂_n^N(φ) = η_n^N(G_n φ) / η_n^N(G_n)`.
    pub eta_hat: f64,
}

impl PointEstimates {
    /// `γ_n^N(φ)`.
    pub fn gamma(&self) -> f64 {
        self.log_gamma_one.exp() * self.eta
    }

    /// `γ̂_n^N(φ)`.
    pub fn gamma_hat(&self) -> f64 {
        self.log_gamma_hat_one.exp() * self.eta_hat
    }
}

pub fn point_estimates<V: TerminalView>(view: &V, phi: impl Fn(&V::State) -> f64) -> Result<PointEstimates> {
    let values = terminal_values(view, phi)?;
    Ok(point_from_values(view, &values))
}

pub(crate) fn point_from_values<V: TerminalView>(view: &V, values: &[f64]) -> PointEstimates {
    let lg = view.terminal_log_potentials();
    let g = relative_weights(lg);
    let eta = crate::stats::mean(values);
    let eta_hat = g.iter().zip(values).map(|(g, v)| g * v).sum::<f64>() / g.iter().sum::<f64>();
    let log_gamma_one = view.log_gamma_one();
    PointEstimates { log_gamma_one, eta, log_gamma_hat_one: log_gamma_one + log_mean_exp(lg), eta_hat }
}
