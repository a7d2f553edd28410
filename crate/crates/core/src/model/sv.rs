use super::{check_observations, check_positive, FeynmanKac};
use crate::error::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Stochastic volatility model: `X_0 ~ N(0, σ²/(1-ρ²))`, `X_p ~ N(ρ X_{p-1}, σ²)`,
/// `G_p(x) = N(y_p; 0, β² e^x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvParams {
    pub persistence: f64,
    pub volatility: f64,
    pub scale: f64,
    #[serde(default)]
    pub observations: Vec<f64>,
}

impl SvParams {
    /// `(ρ, σ, β) = (0.95, 0.25, 0.5)`.
    pub fn standard(observations: Vec<f64>) -> Self {
        Self { persistence: 0.95, volatility: 0.25, scale: 0.5, observations }
    }

    pub fn initial_variance(&self) -> f64 {
        self.volatility * self.volatility / (1.0 - self.persistence * self.persistence)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.persistence.abs() < 1.0) {
            return crate::error::config(format!("persistence must satisfy |rho| < 1, got {}", self.persistence));
        }
        check_positive("volatility", self.volatility)?;
        check_positive("scale", self.scale)?;
        check_observations(&self.observations)
    }

    /// Simulates `len` observations from the model (ignores `self.observations`).
    pub fn simulate_observations<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        let mut x = self.initial_variance().sqrt() * rng.sample::<f64, _>(StandardNormal);
        let mut out = Vec::with_capacity(len);
        for p in 0..len {
            if p > 0 {
                x = self.persistence * x + self.volatility * rng.sample::<f64, _>(StandardNormal);
            }
            out.push(self.scale * (0.5 * x).exp() * rng.sample::<f64, _>(StandardNormal));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct StochasticVolatility {
    params: SvParams,
    init_sd: f64,
    log_norm: f64,
    inv_two_scale_sq: f64,
}

pub fn make_sv(params: SvParams) -> Result<StochasticVolatility> {
    params.validate()?;
    let b2 = params.scale * params.scale;
    Ok(StochasticVolatility {
        init_sd: params.initial_variance().sqrt(),
        log_norm: -0.5 * (std::f64::consts::TAU * b2).ln(),
        inv_two_scale_sq: 0.5 / b2,
        params,
    })
}

impl StochasticVolatility {
    pub fn params(&self) -> &SvParams {
        &self.params
    }
}

impl FeynmanKac for StochasticVolatility {
    type State = f64;

    fn horizon(&self) -> usize {
        self.params.observations.len() - 1
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.init_sd * rng.sample::<f64, _>(StandardNormal)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, _step: usize, from: &f64, rng: &mut R) -> f64 {
        self.params.persistence * from + self.params.volatility * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_potential(&self, step: usize, x: &f64) -> f64 {
        let y = self.params.observations[step];
        self.log_norm - 0.5 * x - y * y * self.inv_two_scale_sq * (-x).exp()
    }

    /// `N(y; 0, v)` is maximized over `v` at `v = y²`; with `y = 0` it is unbounded.
    fn log_potential_bound(&self, step: usize) -> Option<f64> {
        let y = self.params.observations[step];
        (y != 0.0).then(|| -0.5 * (std::f64::consts::TAU * y * y).ln() - 0.5)
    }
}
