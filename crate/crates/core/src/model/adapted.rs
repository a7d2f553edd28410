use super::FeynmanKac;
use rand::Rng;

/// A model whose one-step potential marginals `M_p(G_p)(x)` are available in
/// closed form, along with samplers for the twisted kernels
/// `M̌_p(x, dx') ∝ M_p(x, dx') G_p(x')`.
pub trait FullyAdaptable: FeynmanKac {
    /// `ln M_0(G_0)`.
    fn log_initial_potential_mass(&self) -> f64;

    /// `ln M_step(G_step)(state)` for `step` in `1..=n`.
    fn log_predictive_potential(&self, step: usize, state: &Self::State) -> f64;

    /// Draw from `M̌_0 ∝ M_0 G_0`.
    fn sample_twisted_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    /// Draw from `M̌_step(from, ·)` for `step` in `1..=n`.
    fn sample_twisted_transition<R: Rng + ?Sized>(&self, step: usize, from: &Self::State, rng: &mut R) -> Self::State;
}

/// The fully adapted transform `(M̌_p, Ǧ_p)` of a model.
///
/// `Ǧ_0(x) = M_0(G_0) M_1(G_1)(x)`, `Ǧ_p(x) = M_{p+1}(G_{p+1})(x)` for
/// `1 <= p < n`, and `Ǧ_n ≡ 1`, so that `γ̌_n` equals the updated measure
/// `γ̂_n` of the source model.
#[derive(Clone, Debug)]
pub struct FullyAdapted<M> {
    inner: M,
}

pub fn make_fully_adapted<M: FullyAdaptable>(model: M) -> FullyAdapted<M> {
    FullyAdapted { inner: model }
}

impl<M> FullyAdapted<M> {
    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: FullyAdaptable> FeynmanKac for FullyAdapted<M> {
    type State = M::State;

    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> M::State {
        self.inner.sample_twisted_initial(rng)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, step: usize, from: &M::State, rng: &mut R) -> M::State {
        self.inner.sample_twisted_transition(step, from, rng)
    }

    fn log_potential(&self, step: usize, state: &M::State) -> f64 {
        let n = self.inner.horizon();
        let mut lg = if step < n { self.inner.log_predictive_potential(step + 1, state) } else { 0.0 };
        if step == 0 {
            lg += self.inner.log_initial_potential_mass();
        }
        lg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_lgssm, LgssmParams};
    use crate::stats::ln_normal_pdf;

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
        let h = (hi - lo) / steps as f64;
        let inner: f64 = (1..steps).map(|i| f(lo + i as f64 * h)).sum();
        h * (inner + 0.5 * (f(lo) + f(hi)))
    }

    #[test]
    fn lgssm_twisted_potential_is_gaussian_convolution() {
        let y = vec![0.5, -1.0, 2.0, 0.3];
        let adapted = make_fully_adapted(make_lgssm(LgssmParams::standard(y.clone())).unwrap());
        for p in 1..3 {
            for x in [-2.0, 0.0, 1.3] {
                let want = ln_normal_pdf(y[p + 1], 0.9 * x, 2.0);
                assert!((adapted.log_potential(p, &x) - want).abs() < 1e-13);
            }
        }
        assert_eq!(adapted.log_potential(3, &0.7), 0.0);
        let g0 = ln_normal_pdf(y[0], 0.0, 2.0) + ln_normal_pdf(y[1], 0.9 * 0.2, 2.0);
        assert!((adapted.log_potential(0, &0.2) - g0).abs() < 1e-13);
    }

    #[test]
    fn lgssm_twisted_kernel_is_gaussian_posterior() {
        let y = vec![0.0, 1.5, -0.5];
        let m = make_lgssm(LgssmParams::standard(y.clone())).unwrap();
        for x in [-1.0, 0.0, 2.5] {
            let (mean, var) = m.twisted_moments(1, x);
            assert!((mean - (0.9 * x + y[1]) / 2.0).abs() < 1e-14);
            assert!((var - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn twisted_potential_matches_quadrature_of_one_step_evidence() {
        let mut params = LgssmParams::standard(vec![0.2, -0.7, 1.9, 0.0]);
        params.transition_variance = 0.6;
        params.observation_variance = 1.4;
        let model = make_lgssm(params.clone()).unwrap();
        let adapted = make_fully_adapted(model.clone());
        for p in 1..3 {
            for x in [-3.0, -0.5, 0.0, 0.8, 2.2] {
                let mean = 0.9 * x;
                let sd = params.transition_variance.sqrt();
                let integrand = |z: f64| {
                    ln_normal_pdf(z, mean, params.transition_variance).exp() * model.log_potential(p + 1, &z).exp()
                };
                let quad = trapezoid(integrand, mean - 20.0 * sd, mean + 20.0 * sd, 8000);
                let got = adapted.log_potential(p, &x).exp();
                assert!((got - quad).abs() < 1e-10, "p={p} x={x}: {got} vs {quad}");
            }
        }
    }
}
