use super::{check_positive, FeynmanKac};
use crate::error::{config, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::sync::Arc;

/// An unnormalized log-density on the real line.
pub trait LogDensity: Send + Sync + Debug {
    fn ln_density(&self, x: f64) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian1d {
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian1d {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mean + self.sd * rng.sample::<f64, _>(StandardNormal)
    }
}

impl LogDensity for Gaussian1d {
    fn ln_density(&self, x: f64) -> f64 {
        crate::stats::ln_normal_pdf(x, self.mean, self.sd * self.sd)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMixture {
    pub components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return config("mixture has no components");
        }
        for c in &self.components {
            check_positive("mixture weight", c.weight)?;
            check_positive("mixture sd", c.sd)?;
        }
        Ok(())
    }
}

impl LogDensity for GaussianMixture {
    fn ln_density(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + crate::stats::ln_normal_pdf(x, c.mean, c.sd * c.sd))
            .collect();
        crate::stats::log_sum_exp(&terms)
    }
}

/// Tempering from an exactly samplable Gaussian `π̄_0` to a target `π̄_1`
/// along `0 = β_0 < … < β_n = 1`.
#[derive(Clone, Debug)]
pub struct TemperedSamplerParams {
    pub initial: Gaussian1d,
    pub target: Arc<dyn LogDensity>,
    pub ladder: Vec<f64>,
    /// Random-walk proposal standard deviations `τ_1..τ_n`.
    pub proposal_sds: Vec<f64>,
    /// Metropolis iterations per kernel application.
    pub iterations: usize,
}

impl TemperedSamplerParams {
    /// `π̄_0 = N(0, 10²)` to `π̄_1 = 0.3 N(-10, 0.1²) + 0.7 N(10, 0.2²)` over eleven steps.
    pub fn bimodal(iterations: usize) -> Self {
        Self {
            initial: Gaussian1d { mean: 0.0, sd: 10.0 },
            target: Arc::new(Self::bimodal_target()),
            ladder: vec![0.0, 0.0005, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0],
            proposal_sds: vec![10.0, 9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0, 1.0],
            iterations,
        }
    }

    pub fn bimodal_target() -> GaussianMixture {
        GaussianMixture {
            components: vec![
                MixtureComponent { weight: 0.3, mean: -10.0, sd: 0.1 },
                MixtureComponent { weight: 0.7, mean: 10.0, sd: 0.2 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("initial sd", self.initial.sd)?;
        let b = &self.ladder;
        if b.len() < 2 {
            return config("tempering ladder needs at least two temperatures");
        }
        if b[0] != 0.0 || *b.last().unwrap() != 1.0 {
            return config("tempering ladder must start at 0 and end at 1");
        }
        if let Some(w) = b.windows(2).find(|w| !(w[1] > w[0])) {
            return config(format!("tempering ladder must be strictly increasing ({} then {})", w[0], w[1]));
        }
        if self.proposal_sds.len() != b.len() - 1 {
            return config(format!("expected {} proposal sds, got {}", b.len() - 1, self.proposal_sds.len()));
        }
        for &t in &self.proposal_sds {
            check_positive("proposal sd", t)?;
        }
        if self.iterations == 0 {
            return config("Metropolis iterations must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TemperedSampler {
    params: TemperedSamplerParams,
}

pub fn make_tempered_sampler(params: TemperedSamplerParams) -> Result<TemperedSampler> {
    params.validate()?;
    Ok(TemperedSampler { params })
}

/// Probability of accepting a symmetric random-walk proposal.
pub fn acceptance_probability(log_current: f64, log_proposed: f64) -> f64 {
    (log_proposed - log_current).exp().min(1.0)
}

/// One random-walk Metropolis step; returns the new state and its log-target.
pub fn metropolis_step<R: Rng + ?Sized>(
    log_target: impl Fn(f64) -> f64,
    x: f64,
    log_x: f64,
    proposal_sd: f64,
    rng: &mut R,
) -> (f64, f64) {
    let y = x + proposal_sd * rng.sample::<f64, _>(StandardNormal);
    let log_y = log_target(y);
    let u: f64 = rng.random();
    if u.ln() < log_y - log_x {
        (y, log_y)
    } else {
        (x, log_x)
    }
}

impl TemperedSampler {
    pub fn params(&self) -> &TemperedSamplerParams {
        &self.params
    }

    /// `ln( π̄_0^{1-β_p} π̄_1^{β_p} )(x)`.
    pub fn log_tempered(&self, step: usize, x: f64) -> f64 {
        let beta = self.params.ladder[step];
        let l0 = self.params.initial.ln_density(x);
        if beta == 0.0 {
            return l0;
        }
        (1.0 - beta) * l0 + beta * self.params.target.ln_density(x)
    }
}

impl FeynmanKac for TemperedSampler {
    type State = f64;

    fn horizon(&self) -> usize {
        self.params.ladder.len() - 1
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.params.initial.sample(rng)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, step: usize, from: &f64, rng: &mut R) -> f64 {
        let target = |x: f64| self.log_tempered(step, x);
        let sd = self.params.proposal_sds[step - 1];
        let (mut x, mut lx) = (*from, target(*from));
        for _ in 0..self.params.iterations {
            (x, lx) = metropolis_step(target, x, lx, sd, rng);
        }
        x
    }

    /// `(β_{p+1} - β_p)(ln π̄_1 - ln π̄_0)` for `p < n`; `G_n ≡ 1`.
    fn log_potential(&self, step: usize, x: &f64) -> f64 {
        let b = &self.params.ladder;
        if step + 1 >= b.len() {
            return 0.0;
        }
        (b[step + 1] - b[step]) * (self.params.target.ln_density(*x) - self.params.initial.ln_density(*x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn bimodal_instance_is_valid() {
        let m = make_tempered_sampler(TemperedSamplerParams::bimodal(10)).unwrap();
        assert_eq!(m.horizon(), 11);
        assert_eq!(m.params().proposal_sds.len(), 11);
    }

    #[test]
    fn rejects_flat_or_decreasing_ladder() {
        let mut p = TemperedSamplerParams::bimodal(10);
        p.ladder[3] = p.ladder[2];
        assert!(make_tempered_sampler(p.clone()).is_err());
        p.ladder[3] = 0.0001;
        assert!(make_tempered_sampler(p).is_err());
        let mut p = TemperedSamplerParams::bimodal(0);
        assert!(make_tempered_sampler(p.clone()).is_err());
        p.iterations = 1;
        p.proposal_sds[0] = 0.0;
        assert!(make_tempered_sampler(p).is_err());
    }

    #[test]
    fn zero_increment_gives_unit_potential() {
        // Bypasses validation on purpose: a repeated temperature is the boundary case.
        let mut p = TemperedSamplerParams::bimodal(1);
        p.ladder[4] = p.ladder[3];
        let m = TemperedSampler { params: p };
        for x in [-10.0, 0.0, 3.0] {
            assert_eq!(m.log_potential(3, &x), 0.0);
        }
    }

    #[test]
    fn symmetric_acceptance_is_target_ratio() {
        assert!((acceptance_probability(-1.0, -3.0) - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(acceptance_probability(-3.0, -1.0), 1.0);
    }

    #[test]
    fn potentials_telescope_to_target_over_initial() {
        let m = make_tempered_sampler(TemperedSamplerParams::bimodal(1)).unwrap();
        let x = 9.8;
        let total: f64 = (0..=m.horizon()).map(|p| m.log_potential(p, &x)).sum();
        let want = m.params().target.ln_density(x) - m.params().initial.ln_density(x);
        assert!((total - want).abs() < 1e-9 * want.abs().max(1.0));
    }

    /// Draws exact samples from the tempered density by inverse CDF on a fine
    /// grid, applies one kernel, and checks the output against the same
    /// density with a chi-squared test.
    fn kernel_preserves_target(step: usize, iterations: usize, seed: u64) {
        let m = make_tempered_sampler(TemperedSamplerParams::bimodal(iterations)).unwrap();
        let (lo, hi, cells) = (-45.0, 45.0, 450_000);
        let h = (hi - lo) / cells as f64;
        let logs: Vec<f64> = (0..cells).map(|i| m.log_tempered(step, lo + (i as f64 + 0.5) * h)).collect();
        let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = Vec::with_capacity(cells);
        let mut acc = 0.0;
        for l in &logs {
            acc += (l - mx).exp();
            cdf.push(acc);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        let quantile = |u: f64| {
            let i = cdf.partition_point(|c| *c < u).min(cells - 1);
            let below = if i == 0 { 0.0 } else { cdf[i - 1] };
            lo + (i as f64 + (u - below) / (cdf[i] - below)) * h
        };
        let bins = 20;
        let edges: Vec<f64> = (1..bins).map(|b| quantile(b as f64 / bins as f64)).collect();
        let mut rng = seeded(seed);
        let draws = 20_000;
        let mut counts = vec![0usize; bins];
        for _ in 0..draws {
            let x0 = quantile(rng.random::<f64>());
            let x1 = m.sample_transition(step, &x0, &mut rng);
            counts[edges.partition_point(|e| *e < x1)] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let crit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(1.0 - 1e-4);
        assert!(chi2 < crit, "step {step}: chi2 = {chi2:.2} >= {crit:.2}");
    }

    #[test]
    fn metropolis_kernels_leave_tempered_targets_invariant() {
        kernel_preserves_target(2, 10, 11);
        kernel_preserves_target(8, 10, 12);
        kernel_preserves_target(10, 1, 13);
        kernel_preserves_target(11, 10, 14);
    }
}
