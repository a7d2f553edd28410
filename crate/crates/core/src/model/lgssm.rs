use super::{check_observations, check_positive, FeynmanKac, FullyAdaptable};
use crate::error::Result;
use crate::stats::ln_normal_pdf;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Scalar linear Gaussian hidden Markov model.
///
/// `X_0 ~ N(m_0, P_0)`, `X_p | X_{p-1} = x ~ N(a x, q)`, `Y_p | X_p = x ~ N(x, r)`,
/// with potentials `G_p(x) = N(y_p; x, r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgssmParams {
    pub transition_coefficient: f64,
    pub transition_variance: f64,
    pub observation_variance: f64,
    #[serde(default)]
    pub initial_mean: f64,
    pub initial_variance: f64,
    #[serde(default)]
    pub observations: Vec<f64>,
}

impl LgssmParams {
    /// `a = 0.9` with unit transition, observation and initial variances.
    pub fn standard(observations: Vec<f64>) -> Self {
        Self {
            transition_coefficient: 0.9,
            transition_variance: 1.0,
            observation_variance: 1.0,
            initial_mean: 0.0,
            initial_variance: 1.0,
            observations,
        }
    }

    /// One hundred observations, all zero except `y_49 = 8`.
    pub fn outlier_observations() -> Vec<f64> {
        let mut y = vec![0.0; 100];
        y[49] = 8.0;
        y
    }

    pub fn validate(&self) -> Result<()> {
        if !self.transition_coefficient.is_finite() || !self.initial_mean.is_finite() {
            return crate::error::config("transition coefficient and initial mean must be finite");
        }
        check_positive("transition_variance", self.transition_variance)?;
        check_positive("observation_variance", self.observation_variance)?;
        check_positive("initial_variance", self.initial_variance)?;
        check_observations(&self.observations)
    }

    /// Simulates `len` observations from the model (ignores `self.observations`).
    pub fn simulate_observations<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut x = self.initial_mean + self.initial_variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
        for p in 0..len {
            if p > 0 {
                x = self.transition_coefficient * x
                    + self.transition_variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
            out.push(x + self.observation_variance.sqrt() * rng.sample::<f64, _>(StandardNormal));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Lgssm {
    params: LgssmParams,
    obs_sd: f64,
    trans_sd: f64,
    init_sd: f64,
    log_bound: f64,
    // Moments of the locally optimal proposals used by the fully adapted model.
    twisted_init_mean: f64,
    twisted_init_sd: f64,
    twisted_var: f64,
}

pub fn make_lgssm(params: LgssmParams) -> Result<Lgssm> {
    params.validate()?;
    let (q, r, p0) = (params.transition_variance, params.observation_variance, params.initial_variance);
    let init_post_var = 1.0 / (1.0 / p0 + 1.0 / r);
    Ok(Lgssm {
        obs_sd: r.sqrt(),
        trans_sd: q.sqrt(),
        init_sd: p0.sqrt(),
        log_bound: -0.5 * (std::f64::consts::TAU * r).ln(),
        twisted_init_mean: init_post_var * (params.initial_mean / p0 + params.observations[0] / r),
        twisted_init_sd: init_post_var.sqrt(),
        twisted_var: 1.0 / (1.0 / q + 1.0 / r),
        params,
    })
}

impl Lgssm {
    pub fn params(&self) -> &LgssmParams {
        &self.params
    }

    /// Mean of `M_p(x, ·)`.
    pub fn transition_mean(&self, x: f64) -> f64 {
        self.params.transition_coefficient * x
    }

    /// Mean and variance of the twisted kernel `M̌_p(x, ·) ∝ M_p(x, ·) G_p`.
    pub fn twisted_moments(&self, step: usize, x: f64) -> (f64, f64) {
        let (q, r) = (self.params.transition_variance, self.params.observation_variance);
        let var = self.twisted_var;
        (var * (self.transition_mean(x) / q + self.params.observations[step] / r), var)
    }
}

impl FeynmanKac for Lgssm {
    type State = f64;

    fn horizon(&self) -> usize {
        self.params.observations.len() - 1
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.params.initial_mean + self.init_sd * rng.sample::<f64, _>(StandardNormal)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, _step: usize, from: &f64, rng: &mut R) -> f64 {
        self.transition_mean(*from) + self.trans_sd * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_potential(&self, step: usize, state: &f64) -> f64 {
        let d = (self.params.observations[step] - state) / self.obs_sd;
        self.log_bound - 0.5 * d * d
    }

    fn log_potential_bound(&self, _step: usize) -> Option<f64> {
        Some(self.log_bound)
    }
}

impl FullyAdaptable for Lgssm {
    fn log_initial_potential_mass(&self) -> f64 {
        let p = &self.params;
        ln_normal_pdf(p.observations[0], p.initial_mean, p.initial_variance + p.observation_variance)
    }

    fn log_predictive_potential(&self, step: usize, state: &f64) -> f64 {
        let p = &self.params;
        ln_normal_pdf(
            p.observations[step],
            self.transition_mean(*state),
            p.transition_variance + p.observation_variance,
        )
    }

    fn sample_twisted_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.twisted_init_mean + self.twisted_init_sd * rng.sample::<f64, _>(StandardNormal)
    }

    fn sample_twisted_transition<R: Rng + ?Sized>(&self, step: usize, from: &f64, rng: &mut R) -> f64 {
        let (mean, var) = self.twisted_moments(step, *from);
        mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn unit_model(obs: Vec<f64>) -> Lgssm {
        make_lgssm(LgssmParams::standard(obs)).unwrap()
    }

    #[test]
    fn potential_at_zero_is_standard_normal_density() {
        let m = unit_model(vec![0.0]);
        let g = m.log_potential(0, &0.0).exp();
        assert!((g - 0.398_942).abs() < 1e-6);
        assert!((g - (std::f64::consts::TAU).powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn transition_mean_contracts_by_point_nine() {
        let m = unit_model(vec![0.0, 0.0]);
        assert!((m.transition_mean(1.0) - 0.9).abs() < 1e-15);
        let mut rng = seeded(3);
        let draws: Vec<f64> = (0..200_000).map(|_| m.sample_transition(1, &1.0, &mut rng)).collect();
        let mean = crate::stats::mean(&draws);
        let se = crate::stats::standard_error(&draws);
        assert!((mean - 0.9).abs() < 4.0 * se);
    }

    #[test]
    fn outlier_sequence_gives_hundred_step_model() {
        let y = LgssmParams::outlier_observations();
        assert_eq!(y[49], 8.0);
        assert_eq!(y.iter().filter(|v| **v != 0.0).count(), 1);
        let m = unit_model(y);
        assert_eq!(m.horizon(), 99);
    }

    #[test]
    fn log_potential_matches_direct_density() {
        let mut p = LgssmParams::standard(vec![0.3, -1.7, 2.5]);
        p.observation_variance = 0.7;
        let m = make_lgssm(p).unwrap();
        for (step, x) in [(0, -2.0), (1, 0.4), (2, 3.3)] {
            let y = m.params().observations[step];
            let direct = (-(y - x) * (y - x) / (2.0 * 0.7)).exp() / (std::f64::consts::TAU * 0.7).sqrt();
            let got = m.log_potential(step, &x).exp();
            assert!(((got - direct) / direct).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_positive_variance() {
        let mut p = LgssmParams::standard(vec![0.0]);
        p.observation_variance = 0.0;
        assert!(make_lgssm(p.clone()).is_err());
        p.observation_variance = 1.0;
        p.transition_variance = -1.0;
        assert!(make_lgssm(p).is_err());
        assert!(make_lgssm(LgssmParams::standard(vec![])).is_err());
    }
}
