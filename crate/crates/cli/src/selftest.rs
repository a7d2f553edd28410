use crate::output::{fmt, Sink, Table};
use anyhow::{bail, Result};
use pfvar::engine::{run_filter, AllocationPlan, ParticleHistory};
use pfvar::model::{make_lgssm, make_sv, LgssmParams, SvParams};
use pfvar::oracle::{enumerate_tracing, Pattern};
use pfvar::rng::{child, derive_seed};
use pfvar::varest::{mu0_normalized, mu_e_normalized, terminal_values, v_from_values};
use pfvar::TerminalView;

const SIZE: usize = 3;
const HORIZON: usize = 2;
const RUNS: u64 = 24;
const TOLERANCE: f64 = 1e-10;

struct Check {
    measure_error: f64,
    v_error: f64,
    reconstruction_error: f64,
}

fn check(h: &ParticleHistory<f64>) -> Result<Check> {
    let x = terminal_values(h, |s| *s)?;
    let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let e = enumerate_tracing(h, &x, &x)?;
    let e_abs = enumerate_tracing(h, &abs, &abs)?;
    let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(f64::MIN_POSITIVE);
    let zero = Pattern::zero();
    let mut measure_error =
        rel(mu0_normalized(h.counts(), h.terminal_eves(), &x, &x), e.mu(zero).normalized, e_abs.mu(zero).normalized);
    for (p, fast) in mu_e_normalized(h, &x, &x).into_iter().enumerate() {
        let b = Pattern::unit(p);
        measure_error = measure_error.max(rel(fast, e.mu(b).normalized, e_abs.mu(b).normalized));
    }
    let eta = x.iter().sum::<f64>() / x.len() as f64;
    let v = v_from_values(h.counts(), h.terminal_eves(), &x);
    let scale = (eta * eta).max(e_abs.mu(zero).normalized);
    Ok(Check {
        measure_error,
        v_error: rel(v, eta * eta - e.mu(zero).normalized, scale),
        reconstruction_error: rel(e.second_moment_normalized(), eta * eta, e_abs.second_moment_normalized()),
    })
}

/// Compares the fast estimators with exhaustive enumeration on small LGSSM and SV runs.
/// A mismatching run is dumped as a history bundle next to the report.
pub fn self_test(seed: u64, sink: &mut Sink) -> Result<()> {
    let plan = AllocationPlan::constant(HORIZON, SIZE)?;
    let mut table = Table::new(["run", "model", "seed", "measure_error", "v_error", "reconstruction_error", "pass"]);
    let mut failures = Vec::new();
    for i in 0..RUNS {
        let run_seed = derive_seed(seed, i);
        let (name, h) = if i % 2 == 0 {
            let y = LgssmParams::standard(vec![]).simulate_observations(HORIZON + 1, &mut child(run_seed, 1));
            ("lgssm", run_filter(&make_lgssm(LgssmParams::standard(y))?, &plan, &mut child(run_seed, 0))?)
        } else {
            let y = SvParams::standard(vec![]).simulate_observations(HORIZON + 1, &mut child(run_seed, 1));
            ("sv", run_filter(&make_sv(SvParams::standard(y))?, &plan, &mut child(run_seed, 0))?)
        };
        let c = check(&h)?;
        let pass = c.measure_error <= TOLERANCE && c.v_error <= TOLERANCE && c.reconstruction_error <= TOLERANCE;
        table.push(vec![
            i.to_string(),
            name.to_string(),
            run_seed.to_string(),
            fmt(c.measure_error),
            fmt(c.v_error),
            fmt(c.reconstruction_error),
            pass.to_string(),
        ]);
        if !pass {
            sink.write(&format!("self_test_failure_{i}.json"), &h.to_bundle().to_json()?)?;
            failures.push(i);
        }
    }
    sink.table("self_test.csv", &table)?;
    if !failures.is_empty() {
        bail!("self-test: {} of {RUNS} runs disagree with the enumeration oracle (runs {failures:?})", failures.len());
    }
    println!("self-test: {RUNS} runs at N = {SIZE}, n = {HORIZON} agree with the enumeration oracle to {TOLERANCE:e}");
    Ok(())
}
