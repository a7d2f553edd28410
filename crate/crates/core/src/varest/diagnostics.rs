use super::terminal_values;
use crate::engine::TerminalView;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-family summaries of the terminal generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyDiagnostics {
    /// `#_n^i`: number of terminal particles with Eve index `i`.
    pub descendants: Vec<usize>,
    /// `Δ_n^i`: mean of `φ` over family `i` minus `η_n^N(φ)`; zero for extinct families.
    pub deviations: Vec<f64>,
    /// `N^{-1} Σ_i (#_n^i - 1)² - n`.
    pub count_statistic: f64,
    /// `N^{-1} Σ_i (#_n^i Δ_n^i)²`.
    pub deviation_statistic: f64,
}

/// Family statistics from terminal Eves and values, without checking the allocation.
pub fn family_diagnostics(initial_count: usize, horizon: usize, eves: &[usize], values: &[f64]) -> FamilyDiagnostics {
    let mut descendants = vec![0usize; initial_count];
    let mut sums = vec![0.0; initial_count];
    for (&e, &v) in eves.iter().zip(values) {
        descendants[e] += 1;
        sums[e] += v;
    }
    let eta = crate::stats::mean(values);
    let deviations: Vec<f64> =
        descendants.iter().zip(&sums).map(|(&c, s)| if c == 0 { 0.0 } else { s / c as f64 - eta }).collect();
    let n = initial_count as f64;
    let count_statistic = descendants.iter().map(|&c| (c as f64 - 1.0).powi(2)).sum::<f64>() / n - horizon as f64;
    let deviation_statistic =
        descendants.iter().zip(&deviations).map(|(&c, d)| (c as f64 * d).powi(2)).sum::<f64>() / n;
    FamilyDiagnostics { descendants, deviations, count_statistic, deviation_statistic }
}

/// Family statistics approximating `N·V_n^N(1)` and `N·V_n^N(φ - η_n^N(φ))` up to `O_p(1/N)`.
///
/// Requires a constant particle number.
pub fn terminal_family_diagnostics<V: TerminalView>(
    view: &V,
    phi: impl Fn(&V::State) -> f64,
) -> Result<FamilyDiagnostics> {
    if !view.plan().is_constant() {
        return Err(Error::Unsupported("family diagnostics require a constant number of particles".into()));
    }
    let values = terminal_values(view, phi)?;
    Ok(family_diagnostics(view.counts()[0], view.horizon(), view.terminal_eves(), &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::small_genealogy;

    #[test]
    fn small_genealogy_counts() {
        let h = small_genealogy();
        let values: Vec<f64> = vec![0.0, 1.0, 2.0, 3.0];
        let d = family_diagnostics(4, 3, h.terminal_eves(), &values);
        assert_eq!(d.descendants, vec![2, 2, 0, 0]);
        let squares: f64 = d.descendants.iter().map(|&c| (c as f64 - 1.0).powi(2)).sum();
        assert_eq!(squares, 4.0);
        assert_eq!(d.count_statistic, 4.0 / 4.0 - 3.0);
        let weighted: f64 = d.descendants.iter().zip(&d.deviations).map(|(&c, d)| c as f64 * d).sum();
        assert!(weighted.abs() < 1e-14);
        assert!(terminal_family_diagnostics(&h, |x| *x).is_err());
    }

    #[test]
    fn initial_generation_is_zero() {
        let eves: Vec<usize> = (0..6).collect();
        let d = family_diagnostics(6, 0, &eves, &[1.0, 2.0, 0.5, 0.0, 3.0, 1.0]);
        assert_eq!(d.count_statistic, 0.0);
        assert!(d.deviations.iter().sum::<f64>().abs() < 1e-14);
    }
}
