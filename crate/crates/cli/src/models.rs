use pfvar::model::{FullyAdapted, Lgssm, StochasticVolatility, TemperedSampler};
use pfvar::oracle::{kalman_filter, KalmanReference, LinearGaussianFk};
use pfvar::FeynmanKac;
use rand::Rng;

/// Every model the harness can run; all have real-valued states.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Lgssm(Lgssm),
    Adapted(FullyAdapted<Lgssm>),
    Sv(StochasticVolatility),
    Tempered(TemperedSampler),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            AnyModel::Lgssm($m) => $e,
            AnyModel::Adapted($m) => $e,
            AnyModel::Sv($m) => $e,
            AnyModel::Tempered($m) => $e,
        }
    };
}

impl FeynmanKac for AnyModel {
    type State = f64;

    fn horizon(&self) -> usize {
        delegate!(self, m => m.horizon())
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        delegate!(self, m => m.sample_initial(rng))
    }

    fn sample_transition<R: Rng + ?Sized>(&self, step: usize, from: &f64, rng: &mut R) -> f64 {
        delegate!(self, m => m.sample_transition(step, from, rng))
    }

    fn log_potential(&self, step: usize, state: &f64) -> f64 {
        delegate!(self, m => m.log_potential(step, state))
    }

    fn log_potential_bound(&self, step: usize) -> Option<f64> {
        delegate!(self, m => m.log_potential_bound(step))
    }
}

impl AnyModel {
    /// The linear Gaussian Feynman–Kac form and its Kalman reference, when the model has one.
    pub fn kalman(&self) -> Option<(LinearGaussianFk, KalmanReference)> {
        let fk = match self {
            AnyModel::Lgssm(m) => LinearGaussianFk::from_lgssm(m.params()).ok()?,
            AnyModel::Adapted(m) => LinearGaussianFk::fully_adapted(m.inner().params()).ok()?,
            _ => return None,
        };
        let reference = kalman_filter(&fk).ok()?;
        Some((fk, reference))
    }
}
