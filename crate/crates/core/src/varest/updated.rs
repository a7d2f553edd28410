use super::coalescence::{vn_from_terms, vpn_from_values};
use super::pairs::v_from_values;
use super::{centered, resampling_correction, terminal_values};
use crate::engine::{ParticleHistory, TerminalView};
use crate::error::{Error, Result};
use crate::stats::relative_weights;
use serde::{Deserialize, Serialize};

/// `φ̂(ζ_n^i) / η_n^N(G_n)` with `φ̂ = G_n · φ`.
///
/// The estimators are homogeneous of degree two in their argument, so feeding
/// these values to a predictive-measure routine yields the updated variant
/// without ever forming `G_n` on an absolute scale.
pub fn updated_values<V: TerminalView>(view: &V, values: &[f64]) -> Vec<f64> {
    let g = relative_weights(view.terminal_log_potentials());
    let eta_g = crate::stats::mean(&g);
    g.iter().zip(values).map(|(g, v)| g * v / eta_g).collect()
}

fn eta_hat(g: &[f64], values: &[f64]) -> f64 {
    g.iter().zip(values).map(|(g, v)| g * v).sum::<f64>() / g.iter().sum::<f64>()
}

/// Updated-measure estimators `V̂_n^N(φ)`, `v̂_{p,n}^N(φ)`, `v̂_n^N(φ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdatedEstimates {
    pub v_hat: f64,
    pub vpn_hat: Vec<f64>,
    pub vn_hat: f64,
}

/// `V̂_n^N(φ) = V_n^N(G_n φ) / η_n^N(G_n)²`.
pub fn compute_v_hat<V: TerminalView>(view: &V, phi: impl Fn(&V::State) -> f64) -> Result<f64> {
    let values = terminal_values(view, phi)?;
    Ok(v_from_values(view.counts(), view.terminal_eves(), &updated_values(view, &values)))
}

pub fn updated_estimators<S>(h: &ParticleHistory<S>, phi: impl Fn(&S) -> f64) -> Result<UpdatedEstimates> {
    let values = updated_values(h, &terminal_values(h, phi)?);
    let vpn_hat = vpn_from_values(h, &values);
    Ok(UpdatedEstimates {
        v_hat: v_from_values(h.counts(), h.terminal_eves(), &values),
        vn_hat: vn_from_terms(&h.plan().weights, &vpn_hat),
        vpn_hat,
    })
}

/// `N Σ_{families} [Σ_{j ∈ family} G_n(ζ_n^j)(φ(ζ_n^j) - η̂_n^N(φ)) / Σ_j G_n(ζ_n^j)]²`.
///
/// Requires a constant particle number.
pub fn chan_lai_estimator<V: TerminalView>(view: &V, phi: impl Fn(&V::State) -> f64) -> Result<f64> {
    if !view.plan().is_constant() {
        return Err(Error::Unsupported("the Chan-Lai form requires a constant number of particles".into()));
    }
    let values = terminal_values(view, phi)?;
    let g = relative_weights(view.terminal_log_potentials());
    let centre = eta_hat(&g, &values);
    let total: f64 = g.iter().sum();
    let n0 = view.counts()[0];
    let mut family = vec![0.0; n0];
    for ((&e, gj), v) in view.terminal_eves().iter().zip(&g).zip(&values) {
        family[e] += gj * (v - centre);
    }
    Ok(n0 as f64 * family.iter().map(|s| (s / total).powi(2)).sum::<f64>())
}

/// `N · V̂_n^N(φ - η̂_n^N(φ)) / Π_{p≤n} N_p/(N_p-1)`, the right-hand side of the Chan-Lai identity.
pub fn chan_lai_via_v_hat<V: TerminalView>(view: &V, values: &[f64]) -> f64 {
    let g = relative_weights(view.terminal_log_potentials());
    let c = centered(values, eta_hat(&g, values));
    let counts = view.counts();
    let v = v_from_values(counts, view.terminal_eves(), &updated_values(view, &c));
    counts[0] as f64 * v / resampling_correction(counts, counts.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_filter;
    use crate::fixtures::small_genealogy;
    use crate::model::{make_lgssm, LgssmParams};
    use crate::rng::seeded;
    use crate::varest::{compute_v, compute_vpn_all};
    use crate::AllocationPlan;

    fn run(n: usize, seed: u64) -> ParticleHistory<f64> {
        let y: Vec<f64> = (0..=n).map(|i| (i as f64).cos()).collect();
        let m = make_lgssm(LgssmParams::standard(y)).unwrap();
        run_filter(&m, &AllocationPlan::constant(n, 30).unwrap(), &mut seeded(seed)).unwrap()
    }

    #[test]
    fn constant_terminal_potential_leaves_estimators_unchanged() {
        let mut h = small_genealogy();
        h.log_potentials[3] = vec![-2.5; 4];
        let phi = |x: &f64| x - 1.0;
        let u = updated_estimators(&h, phi).unwrap();
        assert!((u.v_hat - compute_v(&h, phi).unwrap()).abs() < 1e-12);
        for (a, b) in u.vpn_hat.iter().zip(compute_vpn_all(&h, phi).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_function_reroutes_through_potential() {
        let h = run(4, 8);
        let g: Vec<f64> = h.log_potentials(4).iter().map(|l| l.exp()).collect();
        let values = g.clone();
        let eta_g = crate::stats::mean(&g);
        let direct = v_from_values(h.counts(), h.terminal_eves(), &values) / (eta_g * eta_g);
        let v_hat = compute_v_hat(&h, |_| 1.0).unwrap();
        assert!((v_hat - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn chan_lai_identity_holds() {
        for seed in 0..5 {
            let h = run(6, seed);
            let values = terminal_values(&h, |x| *x).unwrap();
            let a = chan_lai_estimator(&h, |x| *x).unwrap();
            let b = chan_lai_via_v_hat(&h, &values);
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{a} {b}");
        }
    }

    #[test]
    fn chan_lai_single_family_is_zero() {
        let h = ParticleHistory::replay(
            vec![3, 3],
            vec![vec![0.0; 3], vec![1.0, 2.0, 4.0]],
            vec![vec![1, 1, 1]],
            vec![vec![0.0; 3], vec![0.1, 0.2, 0.3]],
        )
        .unwrap();
        assert!(chan_lai_estimator(&h, |x| *x).unwrap().abs() < 1e-15);
    }

    #[test]
    fn chan_lai_two_families_by_hand() {
        // Eves (0, 0, 1), G_n = (1, 2, 1), φ = (1, 3, 2), N = 3.
        let h = ParticleHistory::replay(
            vec![3, 3],
            vec![vec![0.0; 3], vec![1.0, 3.0, 2.0]],
            vec![vec![0, 0, 1]],
            vec![vec![0.0; 3], vec![0.0, 2f64.ln(), 0.0]],
        )
        .unwrap();
        // η̂ = (1 + 6 + 2) / 4 = 9/4; family sums 1(-5/4) + 2(3/4) = 1/4 and -1/4.
        let want = 3.0 * 2.0 * (0.25f64 / 4.0).powi(2);
        let got = chan_lai_estimator(&h, |x| *x).unwrap();
        assert!((got - want).abs() < 1e-15, "{got} {want}");
        let values = terminal_values(&h, |x| *x).unwrap();
        assert!((chan_lai_via_v_hat(&h, &values) - want).abs() < 1e-15);
    }

    #[test]
    fn chan_lai_rejects_varying_counts() {
        assert!(matches!(chan_lai_estimator(&small_genealogy(), |x| *x), Err(Error::Unsupported(_))));
    }
}
