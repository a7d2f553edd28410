use pfvar::engine::{multinomial_resample, run_filter, AllocationPlan, HistoryBundle, ParticleHistory};
use pfvar::model::{make_fully_adapted, make_lgssm, FeynmanKac, FullyAdaptable, LgssmParams};
use pfvar::rng::seeded;
use pfvar::tuning::{optimal_allocation, two_stage_allocation, AllocationRule, TwoStageOptions};
use pfvar::varest::{
    chan_lai_estimator, chan_lai_via_v_hat, compute_mu0n, compute_v, compute_vn, compute_vpn_all, estimate,
    terminal_family_diagnostics, terminal_values,
};
use pfvar::TerminalView;
use proptest::prelude::*;
use rand::Rng;

fn lgssm(len: usize, seed: u64) -> pfvar::model::Lgssm {
    let y = LgssmParams::standard(vec![]).simulate_observations(len, &mut seeded(seed ^ 0xABCD));
    make_lgssm(LgssmParams::standard(y)).unwrap()
}

fn run(n: usize, size: usize, seed: u64) -> ParticleHistory<f64> {
    run_filter(&lgssm(n + 1, seed), &AllocationPlan::constant(n, size).unwrap(), &mut seeded(seed)).unwrap()
}

/// `N (Σ G_n |φ - η̂_n^N(φ)| / Σ G_n)²`, the size of the terms cancelling inside the Chan-Lai sum.
fn chan_lai_scale(h: &ParticleHistory<f64>, values: &[f64]) -> f64 {
    let g = pfvar::stats::relative_weights(h.terminal_log_potentials());
    let total: f64 = g.iter().sum();
    let centre = g.iter().zip(values).map(|(g, v)| g * v).sum::<f64>() / total;
    let spread = g.iter().zip(values).map(|(g, v)| g * (v - centre).abs()).sum::<f64>() / total;
    h.counts()[0] as f64 * spread * spread
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eve_indices_propagate(n in 0usize..6, size in 2usize..40, seed in any::<u64>()) {
        let h = run(n, size, seed);
        for p in 1..=n {
            for (i, &a) in h.ancestors(p - 1).iter().enumerate() {
                prop_assert_eq!(h.eves(p)[i], h.eves(p - 1)[a]);
            }
        }
    }

    #[test]
    fn two_routes_to_v_agree(n in 0usize..8, size in 2usize..60, seed in any::<u64>()) {
        let h = run(n, size, seed);
        let x = terminal_values(&h, |s| *s).unwrap();
        let eta = x.iter().sum::<f64>() / x.len() as f64;
        let v = compute_v(&h, |s| *s).unwrap();
        let mu = compute_mu0n(&h, |s| *s).unwrap().normalized;
        prop_assert!((v - (eta * eta - mu)).abs() <= 1e-10 * (eta * eta).max(mu.abs()).max(1e-300));
    }

    #[test]
    fn chan_lai_identity(n in 0usize..8, size in 2usize..60, seed in any::<u64>()) {
        let h = run(n, size, seed);
        let values = terminal_values(&h, |s| *s).unwrap();
        let a = chan_lai_estimator(&h, |s| *s).unwrap();
        let b = chan_lai_via_v_hat(&h, &values);
        prop_assert!((a - b).abs() <= 1e-10 * chan_lai_scale(&h, &values), "{} {}", a, b);
    }

    #[test]
    fn family_sums(n in 0usize..8, size in 2usize..60, seed in any::<u64>()) {
        let h = run(n, size, seed);
        let d = terminal_family_diagnostics(&h, |s| *s).unwrap();
        prop_assert_eq!(d.descendants.iter().sum::<usize>(), size);
        let weighted: f64 = d.descendants.iter().zip(&d.deviations).map(|(&c, dv)| c as f64 * dv).sum();
        let scale: f64 = terminal_values(&h, |s| s.abs()).unwrap().iter().sum();
        prop_assert!(weighted.abs() <= 1e-10 * scale.max(1.0));
        if n == 0 {
            prop_assert_eq!(d.count_statistic, 0.0);
        }
    }

    #[test]
    fn vn_is_weighted_sum(counts in prop::collection::vec(2usize..30, 1..6), seed in any::<u64>()) {
        let n = counts.len() - 1;
        let plan = AllocationPlan::from_counts(&counts).unwrap();
        let h = run_filter(&lgssm(n + 1, seed), &plan, &mut seeded(seed)).unwrap();
        let vpn = compute_vpn_all(&h, |s| *s).unwrap();
        let vn = compute_vn(&h, |s| *s).unwrap();
        let want: f64 = vpn.iter().zip(&plan.weights).map(|(v, c)| v / c).sum();
        prop_assert_eq!(vn, want);
        let r = estimate(&h, |s| *s).unwrap();
        prop_assert_eq!(r.decomposition.unwrap().vn, vn);
    }

    #[test]
    fn optimal_allocation_first_order_conditions(a in prop::collection::vec(0.0f64..100.0, 1..30)) {
        prop_assume!(a.iter().any(|&v| v > 0.0));
        let r = optimal_allocation(&a).unwrap();
        prop_assert!((r.weights.iter().sum::<f64>() - a.len() as f64).abs() <= 1e-10 * a.len() as f64);
        let ratios: Vec<f64> = a.iter().zip(&r.weights).filter(|(v, _)| **v > 0.0).map(|(v, c)| c * c / v).collect();
        for q in &ratios {
            prop_assert!((q - ratios[0]).abs() <= 1e-10 * ratios[0]);
        }
        let objective: f64 = a.iter().zip(&r.weights).filter(|(v, _)| **v > 0.0).map(|(v, c)| v / c).sum();
        prop_assert!((objective - r.objective).abs() <= 1e-10 * r.objective);
        prop_assert!(r.objective <= a.iter().sum::<f64>() * (1.0 + 1e-12));
    }

    #[test]
    fn two_stage_plans_are_normalized(n in 0usize..10, seed in any::<u64>(), linear in any::<bool>()) {
        let m = lgssm(n + 1, seed);
        let rule = if linear { AllocationRule::Linear } else { AllocationRule::SquareRoot };
        let r = two_stage_allocation(&m, |_| 1.0, 64, TwoStageOptions { rule, floor: None }, &mut seeded(seed)).unwrap();
        prop_assert!(r.plan.weights.iter().all(|&c| c > 0.0));
        prop_assert!((r.plan.weights.iter().sum::<f64>() - (n + 1) as f64).abs() <= 1e-12 * (n + 1) as f64);
        prop_assert!(r.plan.counts().iter().all(|&c| c >= 2));
    }

    #[test]
    fn bundle_round_trip(n in 0usize..6, size in 2usize..20, seed in any::<u64>()) {
        let h = run(n, size, seed);
        let json = h.to_bundle().to_json().unwrap();
        let back = ParticleHistory::from_bundle(&HistoryBundle::from_json(&json).unwrap()).unwrap();
        prop_assert_eq!(back.counts(), h.counts());
        prop_assert_eq!(back.log_gamma_one(), h.log_gamma_one());
        prop_assert_eq!(compute_v(&back, |s| *s).unwrap(), compute_v(&h, |s| *s).unwrap());
    }

    #[test]
    fn resampling_returns_valid_indices(w in prop::collection::vec(1e-3f64..10.0, 1..50), count in 1usize..100, seed in any::<u64>()) {
        let a = multinomial_resample(&w, count, &mut seeded(seed)).unwrap();
        prop_assert_eq!(a.len(), count);
        prop_assert!(a.iter().all(|&i| i < w.len()));
    }
}

/// Gaussian random walk with a constant potential; the adapted potentials are constant too.
struct ConstantPotential {
    horizon: usize,
    log_g: f64,
}

impl FeynmanKac for ConstantPotential {
    type State = f64;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random::<f64>()
    }

    fn sample_transition<R: Rng + ?Sized>(&self, _step: usize, from: &f64, rng: &mut R) -> f64 {
        from + rng.random::<f64>() - 0.5
    }

    fn log_potential(&self, _step: usize, _state: &f64) -> f64 {
        self.log_g
    }
}

impl FullyAdaptable for ConstantPotential {
    fn log_initial_potential_mass(&self) -> f64 {
        self.log_g
    }

    fn log_predictive_potential(&self, _step: usize, _state: &f64) -> f64 {
        self.log_g
    }

    fn sample_twisted_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_initial(rng)
    }

    fn sample_twisted_transition<R: Rng + ?Sized>(&self, step: usize, from: &f64, rng: &mut R) -> f64 {
        self.sample_transition(step, from, rng)
    }
}

#[test]
fn adapted_constant_potential_is_exact() {
    let model = ConstantPotential { horizon: 4, log_g: -0.7 };
    let adapted = make_fully_adapted(ConstantPotential { horizon: 4, log_g: -0.7 });
    let plan = AllocationPlan::constant(4, 10).unwrap();
    let h = run_filter(&adapted, &plan, &mut seeded(2)).unwrap();
    // γ̌_n(1) = γ̂_n(1) = G^{n+1}; Ǧ_0 carries two factors and Ǧ_n none.
    assert!((h.log_gamma_one() - 5.0 * -0.7).abs() < 1e-12);
    assert!((adapted.log_potential(0, &0.0) - 2.0 * -0.7).abs() < 1e-15);
    assert_eq!(adapted.log_potential(4, &0.0), 0.0);
    let plain = run_filter(&model, &plan, &mut seeded(2)).unwrap();
    assert!((plain.log_gamma_one() - 4.0 * -0.7).abs() < 1e-12);
}
