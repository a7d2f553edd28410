#![allow(dead_code)]

use pfvar::engine::{run_filter, AllocationPlan, ParticleHistory};
use pfvar::model::{make_lgssm, make_sv, LgssmParams, SvParams};
use pfvar::oracle::{enumerate_tracing, Pattern};
use pfvar::rng::{child, seeded};
use pfvar::varest::{mu0_normalized, mu_e_normalized, terminal_values};
use pfvar::TerminalView;

#[derive(Clone, Copy, Debug)]
pub enum Kind {
    Lgssm,
    Sv,
}

/// A small run with observations simulated from the model itself.
pub fn small_run(kind: Kind, counts: &[usize], seed: u64) -> ParticleHistory<f64> {
    let len = counts.len();
    let plan = AllocationPlan::from_counts(counts).unwrap();
    let mut rng = seeded(seed);
    match kind {
        Kind::Lgssm => {
            let base = LgssmParams::standard(vec![]);
            let y = base.simulate_observations(len, &mut child(seed, 1));
            run_filter(&make_lgssm(LgssmParams::standard(y)).unwrap(), &plan, &mut rng).unwrap()
        }
        Kind::Sv => {
            let base = SvParams::standard(vec![]);
            let y = base.simulate_observations(len, &mut child(seed, 1));
            run_filter(&make_sv(SvParams::standard(y)).unwrap(), &plan, &mut rng).unwrap()
        }
    }
}

/// `|a - b| ≤ tol · scale`, with `scale` the same quantity computed on absolute values.
pub fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.abs().max(f64::MIN_POSITIVE)
}

/// Largest scaled discrepancy between the fast measures and exhaustive enumeration
/// over `0_n`, every `e_p`, and the asymmetric `1 ⊗ (φ - η_n^N(φ))` arguments; plus the
/// second-moment reconstruction error and the Eve-identity flag.
pub struct OracleComparison {
    pub measure_error: f64,
    pub reconstruction_error: f64,
    pub eve_identity: bool,
    pub pair_mass_error: f64,
}

pub fn compare_with_enumeration(h: &ParticleHistory<f64>) -> OracleComparison {
    let n = h.horizon();
    let counts = h.counts();
    let eves = h.terminal_eves();
    let x = terminal_values(h, |s| *s).unwrap();
    let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let eta = x.iter().sum::<f64>() / x.len() as f64;
    let ones = vec![1.0; x.len()];
    let c: Vec<f64> = x.iter().map(|v| v - eta).collect();
    let c_abs: Vec<f64> = c.iter().map(|v| v.abs()).collect();

    let e = enumerate_tracing(h, &x, &x).unwrap();
    let e_abs = enumerate_tracing(h, &abs, &abs).unwrap();
    let e_asym = enumerate_tracing(h, &ones, &c).unwrap();
    let e_asym_abs = enumerate_tracing(h, &ones, &c_abs).unwrap();

    let rel = |a: f64, b: f64, s: f64| (a - b).abs() / s.abs().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    let zero = Pattern::zero();
    worst = worst.max(rel(mu0_normalized(counts, eves, &x, &x), e.mu(zero).normalized, e_abs.mu(zero).normalized));
    let fast = mu_e_normalized(h, &x, &x);
    let fast_asym = mu_e_normalized(h, &ones, &c);
    for p in 0..=n {
        let b = Pattern::unit(p);
        worst = worst.max(rel(fast[p], e.mu(b).normalized, e_abs.mu(b).normalized));
        worst = worst.max(rel(fast_asym[p], e_asym.mu(b).normalized, e_asym_abs.mu(b).normalized));
    }
    let reconstruction_error = rel(e.second_moment_normalized(), eta * eta, e_abs.second_moment_normalized());
    let pair_mass_error = e.pairs.iter().map(|p| (p.total_probability() - 1.0).abs()).fold(0.0, f64::max);
    OracleComparison {
        measure_error: worst,
        reconstruction_error,
        eve_identity: e.eve_identity_holds(eves),
        pair_mass_error,
    }
}
