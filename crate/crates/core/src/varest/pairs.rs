use super::{resampling_correction, terminal_values, MeasureEstimate};
use crate::engine::TerminalView;
use crate::error::Result;

/// `Σ_{i,j: E^i ≠ E^j} x_i y_j`, via `(Σ x)(Σ y) - Σ_families (Σ_fam x)(Σ_fam y)`.
pub fn distinct_eve_cross_sum(eves: &[usize], families: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut sx = vec![0.0; families];
    let mut sy = vec![0.0; families];
    for ((&e, &a), &b) in eves.iter().zip(x).zip(y) {
        sx[e] += a;
        sy[e] += b;
    }
    let ty: f64 = sy.iter().sum();
    // Σ_e sx_e (ty - sy_e) keeps the cancellation inside each family.
    sx.iter().zip(&sy).map(|(a, b)| a * (ty - b)).sum()
}

/// `V_n^N` from terminal values `φ(ζ_n^i)`:
/// `η_n^N(φ)² - Π_{p<n} N_p/(N_p-1) · [N_n(N_n-1)]^{-1} Σ_{E^i≠E^j} φ_i φ_j`.
pub fn v_from_values(counts: &[usize], eves: &[usize], values: &[f64]) -> f64 {
    let n = counts.len() - 1;
    let nn = counts[n] as f64;
    let eta = values.iter().sum::<f64>() / nn;
    let cross = distinct_eve_cross_sum(eves, counts[0], values, values);
    eta * eta - resampling_correction(counts, n) * cross / (nn * (nn - 1.0))
}

/// The unbiased relative variance estimator `V_n^N(φ)`.
pub fn compute_v<V: TerminalView>(view: &V, phi: impl Fn(&V::State) -> f64) -> Result<f64> {
    let values = terminal_values(view, phi)?;
    Ok(v_from_values(view.counts(), view.terminal_eves(), &values))
}

/// `μ_{0_n}^N(x ⊗ y) / γ_n^N(1)² = Π_{p≤n} N_p/(N_p-1) · N_n^{-2} Σ_{E^i≠E^j} x_i y_j`.
pub fn mu0_normalized(counts: &[usize], eves: &[usize], x: &[f64], y: &[f64]) -> f64 {
    let n = counts.len() - 1;
    let nn = counts[n] as f64;
    resampling_correction(counts, n + 1) * distinct_eve_cross_sum(eves, counts[0], x, y) / (nn * nn)
}

/// `μ_{0_n}^N(φ ⊗ φ)`.
pub fn compute_mu0n<V: TerminalView>(view: &V, phi: impl Fn(&V::State) -> f64) -> Result<MeasureEstimate> {
    let values = terminal_values(view, phi)?;
    Ok(MeasureEstimate {
        normalized: mu0_normalized(view.counts(), view.terminal_eves(), &values, &values),
        log_gamma_one: view.log_gamma_one(),
    })
}
