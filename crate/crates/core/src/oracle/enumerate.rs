use crate::engine::{ParticleHistory, TerminalView};
use crate::error::{Error, Result};
use crate::stats::relative_weights;
use crate::varest::MeasureEstimate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Maximum number of `(K¹, K²)` leaves an enumeration may visit.
pub const PATH_LIMIT: usize = 1_000_000;

/// A binary string `b ∈ {0,1}^{n+1}`; bit `p` is `b_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern(pub u64);

impl Pattern {
    pub fn zero() -> Self {
        Pattern(0)
    }

    /// `e_p`.
    pub fn unit(p: usize) -> Self {
        Pattern(1 << p)
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Pattern(bits.iter().enumerate().fold(0, |acc, (p, &b)| acc | (u64::from(b) << p)))
    }

    pub fn bit(self, p: usize) -> bool {
        self.0 >> p & 1 == 1
    }

    /// Every pattern of length `horizon + 1`.
    pub fn all(horizon: usize) -> impl Iterator<Item = Pattern> {
        (0..1u64 << (horizon + 1)).map(Pattern)
    }

    /// `b_0 b_1 … b_n`.
    pub fn to_string_with(self, horizon: usize) -> String {
        (0..=horizon).map(|p| if self.bit(p) { '1' } else { '0' }).collect()
    }

    /// `Π_p N_p^{b_p} (N_p / (N_p - 1))^{1 - b_p}`.
    pub fn measure_factor(self, counts: &[usize]) -> f64 {
        counts
            .iter()
            .enumerate()
            .map(|(p, &c)| {
                let c = c as f64;
                if self.bit(p) {
                    c
                } else {
                    c / (c - 1.0)
                }
            })
            .product()
    }

    /// `Π_p (1/N_p)^{b_p} (1 - 1/N_p)^{1 - b_p}`.
    pub fn decomposition_weight(self, counts: &[usize]) -> f64 {
        1.0 / self.measure_factor(counts)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

/// One `K²` path given the terminal pair and `K¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct TracingPath {
    /// `K²_0, …, K²_n`.
    pub lineage: Vec<usize>,
    /// Conditional probability given `(A, ζ)` and `(K¹_n, K²_n)`.
    pub probability: f64,
    pub pattern: Pattern,
}

/// All tracing paths for one terminal pair `(K¹_n, K²_n) = (i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEnumeration {
    pub first: usize,
    pub second: usize,
    /// `K¹_0, …, K¹_n`: the ancestral lineage of `i`.
    pub lineage: Vec<usize>,
    pub paths: Vec<TracingPath>,
}

impl PairEnumeration {
    pub fn total_probability(&self) -> f64 {
        self.paths.iter().map(|p| p.probability).sum()
    }
}

/// Accumulated mass of the leaves with a given coincidence pattern.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PatternMass {
    /// `P((K¹,K²) ∈ I(b) | A, ζ)`.
    pub probability: f64,
    /// `E[1{(K¹,K²) ∈ I(b)} x(ζ^{K¹_n}) y(ζ^{K²_n}) | A, ζ]`.
    pub weighted: f64,
}

/// Exhaustive enumeration of `(K¹, K²)` given a run.
#[derive(Clone, Debug)]
pub struct TracingEnumeration {
    pub counts: Vec<usize>,
    pub log_gamma_one: f64,
    pub pairs: Vec<PairEnumeration>,
    pub masses: BTreeMap<Pattern, PatternMass>,
}

impl TracingEnumeration {
    pub fn horizon(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn mass(&self, b: Pattern) -> PatternMass {
        self.masses.get(&b).copied().unwrap_or_default()
    }

    pub fn leaves(&self) -> usize {
        self.pairs.iter().map(|p| p.paths.len()).sum()
    }

    /// `μ_b^N(x ⊗ y)`.
    pub fn mu(&self, b: Pattern) -> MeasureEstimate {
        MeasureEstimate {
            normalized: b.measure_factor(&self.counts) * self.mass(b).weighted,
            log_gamma_one: self.log_gamma_one,
        }
    }

    /// `Σ_b Π_p (1/N_p)^{b_p}(1-1/N_p)^{1-b_p} μ_b^N(x ⊗ y) / γ_n^N(1)²`.
    pub fn second_moment_normalized(&self) -> f64 {
        Pattern::all(self.horizon()).map(|b| b.decomposition_weight(&self.counts) * self.mu(b).normalized).sum()
    }

    /// Whether every leaf has `b = 0_n` exactly when the terminal Eves differ.
    pub fn eve_identity_holds(&self, terminal_eves: &[usize]) -> bool {
        self.pairs.iter().all(|pair| {
            let distinct = terminal_eves[pair.first] != terminal_eves[pair.second];
            pair.paths.iter().all(|path| (path.pattern == Pattern::zero()) == distinct)
        })
    }

    /// Per-pattern values for serialization.
    pub fn values(&self) -> PatternValues {
        let n = self.horizon();
        PatternValues {
            horizon: n,
            counts: self.counts.clone(),
            log_gamma_one: self.log_gamma_one,
            patterns: Pattern::all(n)
                .map(|b| {
                    let m = self.mass(b);
                    PatternEntry {
                        pattern: b.to_string_with(n),
                        probability: m.probability,
                        weighted: m.weighted,
                        mu_normalized: self.mu(b).normalized,
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    /// `b_0 b_1 … b_n`.
    pub pattern: String,
    pub probability: f64,
    pub weighted: f64,
    /// `μ_b^N / γ_n^N(1)²`.
    pub mu_normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternValues {
    pub horizon: usize,
    pub counts: Vec<usize>,
    pub log_gamma_one: f64,
    pub patterns: Vec<PatternEntry>,
}

struct Walker<'a, S> {
    h: &'a ParticleHistory<S>,
    /// Normalized `G_p` weights.
    weights: Vec<Vec<f64>>,
    lineage: Vec<usize>,
    visited: usize,
}

impl<S> Walker<'_, S> {
    /// Extends `K²` from time `p` down to 0, collecting complete paths.
    fn descend(&mut self, p: usize, k2: &mut Vec<usize>, prob: f64, out: &mut Vec<TracingPath>) -> Result<()> {
        if p == 0 {
            self.visited += 1;
            if self.visited > PATH_LIMIT {
                return Err(Error::EnumerationTooLarge { paths: self.visited as f64, limit: PATH_LIMIT });
            }
            let mut lineage = k2.clone();
            lineage.reverse();
            let bits: Vec<bool> = lineage.iter().zip(&self.lineage).map(|(a, b)| a == b).collect();
            out.push(TracingPath { lineage, probability: prob, pattern: Pattern::from_bits(&bits) });
            return Ok(());
        }
        let current = *k2.last().unwrap();
        if current != self.lineage[p] {
            k2.push(self.h.ancestors(p - 1)[current]);
            self.descend(p - 1, k2, prob, out)?;
            k2.pop();
        } else {
            for k in 0..self.h.counts()[p - 1] {
                let w = self.weights[p - 1][k];
                if w == 0.0 {
                    continue;
                }
                k2.push(k);
                self.descend(p - 1, k2, prob * w, out)?;
                k2.pop();
            }
        }
        Ok(())
    }
}

/// Enumerates `(K¹, K²)` and accumulates pattern masses weighted by `x(ζ^{K¹_n}) y(ζ^{K²_n})`.
pub fn enumerate_tracing<S>(h: &ParticleHistory<S>, x: &[f64], y: &[f64]) -> Result<TracingEnumeration> {
    let n = h.horizon();
    let counts = h.counts().to_vec();
    let nn = counts[n];
    if x.len() != nn || y.len() != nn {
        return Err(Error::Config(format!("expected {nn} terminal values")));
    }
    if n >= 64 {
        return Err(Error::Unsupported("patterns longer than 64 steps".into()));
    }
    if nn.saturating_mul(nn) > PATH_LIMIT {
        return Err(Error::EnumerationTooLarge { paths: (nn * nn) as f64, limit: PATH_LIMIT });
    }
    let weights = (0..n)
        .map(|p| {
            let w = relative_weights(h.log_potentials(p));
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let mut walker = Walker { h, weights, lineage: Vec::new(), visited: 0 };
    let uniform = 1.0 / (nn * nn) as f64;
    let mut pairs = Vec::with_capacity(nn * nn);
    let mut masses: BTreeMap<Pattern, PatternMass> = BTreeMap::new();
    for i in 0..nn {
        let mut lineage = vec![0; n + 1];
        lineage[n] = i;
        for p in (0..n).rev() {
            lineage[p] = h.ancestors(p)[lineage[p + 1]];
        }
        walker.lineage = lineage.clone();
        for j in 0..nn {
            let mut paths = Vec::new();
            walker.descend(n, &mut vec![j], 1.0, &mut paths)?;
            for path in &paths {
                let m = masses.entry(path.pattern).or_default();
                m.probability += uniform * path.probability;
                m.weighted += uniform * path.probability * x[i] * y[j];
            }
            pairs.push(PairEnumeration { first: i, second: j, lineage: lineage.clone(), paths });
        }
    }
    Ok(TracingEnumeration { counts, log_gamma_one: h.log_gamma_one(), pairs, masses })
}

/// `μ_b^N(φ ⊗ ψ)` by exhaustive enumeration.
pub fn brute_force_mu<S>(
    h: &ParticleHistory<S>,
    b: Pattern,
    phi: impl Fn(&S) -> f64,
    psi: impl Fn(&S) -> f64,
) -> Result<MeasureEstimate> {
    let x = crate::varest::terminal_values(h, phi)?;
    let y = crate::varest::terminal_values(h, psi)?;
    Ok(enumerate_tracing(h, &x, &y)?.mu(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::small_genealogy;

    fn two_by_two(g0: [f64; 2]) -> ParticleHistory<f64> {
        ParticleHistory::replay(
            vec![2, 2],
            vec![vec![0.0, 1.0], vec![10.0, 20.0]],
            vec![vec![0, 0]],
            vec![vec![g0[0].ln(), g0[1].ln()], vec![0.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_two_by_two() {
        // Both time-1 particles descend from particle 0; G_0 = (1, 3).
        let h = two_by_two([1.0, 3.0]);
        let x = [1.0, 2.0];
        let e = enumerate_tracing(&h, &x, &x).unwrap();
        // i = j: K¹_1 = K²_1, K²_0 ~ (1/4, 3/4), K¹_0 = 0: b = 11 w.p. 1/4, b = 10 (bit 1 only) w.p. 3/4.
        // i ≠ j: lineages meet at time 0 deterministically: b = 01 (bit 0 only).
        let b11 = Pattern::from_bits(&[true, true]);
        let b_1 = Pattern::from_bits(&[false, true]);
        let b0_ = Pattern::from_bits(&[true, false]);
        assert!((e.mass(b11).probability - 0.5 * 0.25).abs() < 1e-15);
        assert!((e.mass(b_1).probability - 0.5 * 0.75).abs() < 1e-15);
        assert!((e.mass(b0_).probability - 0.5).abs() < 1e-15);
        assert_eq!(e.mass(Pattern::zero()).probability, 0.0);
        // weighted: diagonal (1 + 4)/4, off-diagonal 2·2/4.
        assert!((e.mass(b_1).weighted - 1.25 * 0.75).abs() < 1e-15);
        assert!((e.mass(b0_).weighted - 1.0).abs() < 1e-15);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let h = small_genealogy();
        let x = vec![1.0; 4];
        let e = enumerate_tracing(&h, &x, &x).unwrap();
        for pair in &e.pairs {
            assert!((pair.total_probability() - 1.0).abs() < 1e-12);
        }
        let total: f64 = e.masses.values().map(|m| m.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(e.eve_identity_holds(h.terminal_eves()));
    }

    #[test]
    fn second_moment_reconstruction() {
        let h = small_genealogy();
        let x = [0.5, -1.0, 2.0, 3.0];
        let e = enumerate_tracing(&h, &x, &x).unwrap();
        let eta = x.iter().sum::<f64>() / 4.0;
        assert!((e.second_moment_normalized() - eta * eta).abs() < 1e-12);
    }

    #[test]
    fn pattern_strings_and_factors() {
        let b = Pattern::from_bits(&[true, false, true]);
        assert_eq!(b.to_string_with(2), "101");
        assert_eq!(Pattern::unit(1).to_string_with(2), "010");
        assert!((b.measure_factor(&[3, 4, 5]) - 3.0 * 4.0 / 3.0 * 5.0).abs() < 1e-14);
        assert_eq!(Pattern::all(2).count(), 8);
    }

    #[test]
    fn guard_refuses_large_instances() {
        let flat = |n: usize, count: usize| {
            ParticleHistory::replay(
                vec![count; n + 1],
                vec![vec![0.0; count]; n + 1],
                vec![vec![0; count]; n],
                vec![vec![0.0; count]; n + 1],
            )
            .unwrap()
        };
        let h = flat(0, 1001);
        let x = vec![1.0; 1001];
        assert!(matches!(enumerate_tracing(&h, &x, &x), Err(Error::EnumerationTooLarge { .. })));
        // Every lineage coalesces at once, so K² branches fully at each step: 100² · 100^5 leaves.
        let h = flat(6, 100);
        let x = vec![1.0; 100];
        assert!(matches!(enumerate_tracing(&h, &x, &x), Err(Error::EnumerationTooLarge { .. })));
    }
}
