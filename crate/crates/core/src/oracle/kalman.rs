use super::gaussian::{GaussianLinear, GaussianPotential, Scaled};
use crate::error::{Error, Result};
use crate::model::LgssmParams;
use serde::{Deserialize, Serialize};

/// `M_p(x, ·) = N(a x + b, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTransition {
    pub coefficient: f64,
    pub offset: f64,
    pub variance: f64,
}

/// A Feynman-Kac model with Gaussian initial law, linear-Gaussian transitions
/// and potentials of the form `exp(κ + h x - λ x²/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianFk {
    pub initial_mean: f64,
    pub initial_variance: f64,
    /// `M_1, …, M_n`.
    pub transitions: Vec<LinearTransition>,
    /// `G_0, …, G_n`.
    pub potentials: Vec<GaussianPotential>,
}

impl LinearGaussianFk {
    pub fn horizon(&self) -> usize {
        self.transitions.len()
    }

    /// The bootstrap model: `G_p(x) = N(y_p; x, r)`.
    pub fn from_lgssm(params: &LgssmParams) -> Result<Self> {
        params.validate()?;
        let y = &params.observations;
        let transition = LinearTransition {
            coefficient: params.transition_coefficient,
            offset: 0.0,
            variance: params.transition_variance,
        };
        Ok(Self {
            initial_mean: params.initial_mean,
            initial_variance: params.initial_variance,
            transitions: vec![transition; y.len() - 1],
            potentials: y.iter().map(|&v| GaussianPotential::observation(v, params.observation_variance)).collect(),
        })
    }

    /// The fully adapted model: `M̌_p` is the law of `X_p` given `(X_{p-1}, y_p)`,
    /// `Ǧ_p(x) = N(y_{p+1}; a x, q + r)`, `Ǧ_n = 1`, and `Ǧ_0` also carries `N(y_0; m_0, P_0 + r)`.
    pub fn fully_adapted(params: &LgssmParams) -> Result<Self> {
        params.validate()?;
        let (a, q, r) = (params.transition_coefficient, params.transition_variance, params.observation_variance);
        let y = &params.observations;
        let n = y.len() - 1;
        let (m0, p0) = (params.initial_mean, params.initial_variance);
        let v0 = 1.0 / (1.0 / p0 + 1.0 / r);
        let v = 1.0 / (1.0 / q + 1.0 / r);
        let transitions =
            (1..=n).map(|p| LinearTransition { coefficient: v * a / q, offset: v * y[p] / r, variance: v }).collect();
        let mut potentials: Vec<GaussianPotential> =
            (0..n).map(|p| GaussianPotential::scaled_observation(y[p + 1], a, q + r)).collect();
        potentials.push(GaussianPotential::ONE);
        potentials[0].log_scale += crate::stats::ln_normal_pdf(y[0], m0, p0 + r);
        Ok(Self { initial_mean: v0 * (m0 / p0 + y[0] / r), initial_variance: v0, transitions, potentials })
    }

    fn validate(&self) -> Result<()> {
        if self.potentials.len() != self.transitions.len() + 1 {
            return Err(Error::Config("need one more potential than transitions".into()));
        }
        let ok = self.initial_variance > 0.0
            && self.transitions.iter().all(|t| t.variance > 0.0)
            && self.potentials.iter().all(|g| g.precision >= 0.0);
        if !ok {
            return Err(Error::Config("variances must be positive and potentials bounded".into()));
        }
        Ok(())
    }

    /// `Q_{p,n}(f)` for `p = 0..=n`.
    pub fn backward(&self, f: GaussianLinear) -> Vec<GaussianLinear> {
        let n = self.horizon();
        let mut out = vec![f; n + 1];
        for p in (0..n).rev() {
            let t = self.transitions[p];
            out[p] = out[p + 1].transition_integral(t.coefficient, t.offset, t.variance).times(self.potentials[p]);
        }
        out
    }
}

/// Exact predictive and updated laws, normalizing constants and backward functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalmanReference {
    /// Mean and variance of `η_p`.
    pub predictive_means: Vec<f64>,
    pub predictive_variances: Vec<f64>,
    /// Mean and variance of `η̂_p`.
    pub updated_means: Vec<f64>,
    pub updated_variances: Vec<f64>,
    /// `ln η_p(G_p)`.
    pub log_increments: Vec<f64>,
    /// `Q_{p,n}(1)`.
    pub q_one: Vec<GaussianLinear>,
    /// `Q_{p,n}(Id)`.
    pub q_identity: Vec<GaussianLinear>,
}

impl KalmanReference {
    pub fn horizon(&self) -> usize {
        self.log_increments.len() - 1
    }

    /// `ln γ_p(1)`.
    pub fn log_gamma_one(&self, p: usize) -> f64 {
        self.log_increments[..p].iter().sum()
    }

    /// `ln γ̂_p(1)`.
    pub fn log_gamma_hat_one(&self, p: usize) -> f64 {
        self.log_increments[..=p].iter().sum()
    }

    fn predictive(&self, p: usize) -> (f64, f64) {
        (self.predictive_means[p], self.predictive_variances[p])
    }
}

pub fn kalman_filter(fk: &LinearGaussianFk) -> Result<KalmanReference> {
    fk.validate()?;
    let n = fk.horizon();
    let mut r = KalmanReference {
        predictive_means: Vec::with_capacity(n + 1),
        predictive_variances: Vec::with_capacity(n + 1),
        updated_means: Vec::with_capacity(n + 1),
        updated_variances: Vec::with_capacity(n + 1),
        log_increments: Vec::with_capacity(n + 1),
        q_one: fk.backward(GaussianLinear::constant(1.0)),
        q_identity: fk.backward(GaussianLinear::affine(0.0, 1.0)),
    };
    let (mut m, mut v) = (fk.initial_mean, fk.initial_variance);
    for p in 0..=n {
        let g = fk.potentials[p];
        r.predictive_means.push(m);
        r.predictive_variances.push(v);
        let inc = GaussianLinear::constant(1.0).times(g).integrate(m, v);
        r.log_increments.push(inc.log + inc.factor.ln());
        let vu = 1.0 / (1.0 / v + g.precision);
        let mu = vu * (m / v + g.linear);
        r.updated_means.push(mu);
        r.updated_variances.push(vu);
        if p < n {
            let t = fk.transitions[p];
            m = t.coefficient * mu + t.offset;
            v = t.coefficient * t.coefficient * vu + t.variance;
        }
    }
    Ok(r)
}

/// Test functions with closed-form asymptotic variances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    One,
    Identity,
    /// `Id` minus its mean under the target measure (`η_n` or `η̂_n`).
    CenteredIdentity,
    Affine {
        alpha: f64,
        beta: f64,
    },
}

impl TestFunction {
    fn resolve(self, reference: &KalmanReference, updated: bool) -> GaussianLinear {
        let n = reference.horizon();
        match self {
            TestFunction::One => GaussianLinear::constant(1.0),
            TestFunction::Identity => GaussianLinear::affine(0.0, 1.0),
            TestFunction::CenteredIdentity => {
                let centre = if updated { reference.updated_means[n] } else { reference.predictive_means[n] };
                GaussianLinear::affine(-centre, 1.0)
            }
            TestFunction::Affine { alpha, beta } => GaussianLinear::affine(alpha, beta),
        }
    }

    pub fn eval(self, x: f64) -> Result<f64> {
        match self {
            TestFunction::One => Ok(1.0),
            TestFunction::Identity => Ok(x),
            TestFunction::Affine { alpha, beta } => Ok(alpha + beta * x),
            TestFunction::CenteredIdentity => {
                Err(Error::Unsupported("the centered identity depends on the target measure".into()))
            }
        }
    }
}

fn squared(s: Scaled) -> Scaled {
    Scaled { log: 2.0 * s.log, factor: s.factor * s.factor }
}

/// `v_{p,n}(φ)` for `p = 0..=n`, or `v̂_{p,n}(φ) = v_{p,n}(G_n φ) / η_n(G_n)²` when `updated`.
pub fn exact_vpn(
    fk: &LinearGaussianFk,
    reference: &KalmanReference,
    phi: TestFunction,
    updated: bool,
) -> Result<Vec<f64>> {
    let n = fk.horizon();
    let phi = phi.resolve(reference, updated);
    let f = if updated { phi.times(fk.potentials[n]) } else { phi };
    let q_f = fk.backward(f);
    let (mn, vn) = reference.predictive(n);
    // Normalizer: η_n(G_n) when updated, 1 otherwise.
    let norm = if updated {
        GaussianLinear::constant(1.0).times(fk.potentials[n]).integrate(mn, vn)
    } else {
        Scaled { log: 0.0, factor: 1.0 }
    };
    let eta = f.integrate(mn, vn).ratio(norm);
    Ok((0..=n)
        .map(|p| {
            let (m, v) = reference.predictive(p);
            let num = q_f[p].integrate_product(&q_f[p], m, v);
            let den = squared(reference.q_one[p].integrate(m, v));
            let den = Scaled { log: den.log + 2.0 * norm.log, factor: den.factor * norm.factor * norm.factor };
            num.ratio(den) - eta * eta
        })
        .collect())
}

/// `σ_n²(φ) = Σ_p c_p^{-1} v_{p,n}(φ)` (or its updated counterpart).
pub fn exact_sigma2(
    fk: &LinearGaussianFk,
    reference: &KalmanReference,
    phi: TestFunction,
    updated: bool,
    weights: &[f64],
) -> Result<f64> {
    if weights.len() != fk.horizon() + 1 {
        return Err(Error::Config("one allocation weight per time step required".into()));
    }
    Ok(exact_vpn(fk, reference, phi, updated)?.iter().zip(weights).map(|(v, c)| v / c).sum())
}

/// Limit of `N E[η_n^N(φ) - η_n(φ)]` for constant `N`:
/// `-Σ_{p<n} η_p(Q_{p,n}(1) Q_{p,n}(φ - η_n(φ))) / η_p(Q_{p,n}(1))²`.
pub fn exact_bias(fk: &LinearGaussianFk, reference: &KalmanReference, phi: TestFunction) -> Result<f64> {
    let n = fk.horizon();
    let f = phi.resolve(reference, false);
    let (mn, vn) = reference.predictive(n);
    let eta = f.integrate(mn, vn).value();
    let centered = GaussianLinear { alpha: f.alpha - eta, ..f };
    let q_c = fk.backward(centered);
    Ok(-(0..n)
        .map(|p| {
            let (m, v) = reference.predictive(p);
            let q1 = reference.q_one[p];
            q1.integrate_product(&q_c[p], m, v).ratio(squared(q1.integrate(m, v)))
        })
        .sum::<f64>())
}

/// [`exact_vpn`] for the bootstrap model of an LGSSM.
pub fn exact_vpn_lgssm(params: &LgssmParams, phi: TestFunction, updated: bool) -> Result<Vec<f64>> {
    let fk = LinearGaussianFk::from_lgssm(params)?;
    let reference = kalman_filter(&fk)?;
    exact_vpn(&fk, &reference, phi, updated)
}
