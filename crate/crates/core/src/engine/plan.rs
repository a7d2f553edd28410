use crate::error::{config, Result};
use serde::{Deserialize, Serialize};

/// Particle numbers `N_p = ⌈c_p N⌉` for `p = 0..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationPlan {
    /// Base size `N`.
    pub base_size: usize,
    /// Relative weights `c_0..c_n`.
    pub weights: Vec<f64>,
}

impl AllocationPlan {
    pub fn new(base_size: usize, weights: Vec<f64>) -> Result<Self> {
        let plan = Self { base_size, weights };
        plan.validate()?;
        Ok(plan)
    }

    /// `c_p ≡ 1` over `horizon + 1` steps.
    pub fn constant(horizon: usize, base_size: usize) -> Result<Self> {
        Self::new(base_size, vec![1.0; horizon + 1])
    }

    /// A plan that reproduces the given counts exactly, with `N = N_0`.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return config("empty particle counts");
        }
        let n0 = counts[0];
        Self::new(n0, counts.iter().map(|&c| c as f64 / n0 as f64).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return config("allocation plan has no weights");
        }
        if let Some((p, c)) = self.weights.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c > 0.0)) {
            return config(format!("allocation weight c_{p} = {c} is not positive"));
        }
        if let Some((p, np)) = self.counts().into_iter().enumerate().find(|(_, np)| *np < 2) {
            return config(format!("particle count N_{p} = {np} is below 2"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.weights.len() - 1
    }

    /// `⌈c_p N⌉`, treating products within 1e-9 (relative) of an integer as that integer.
    pub fn counts(&self) -> Vec<usize> {
        let n = self.base_size as f64;
        self.weights
            .iter()
            .map(|c| {
                let x = c * n;
                let r = x.round();
                if (x - r).abs() <= 1e-9 * x.max(1.0) {
                    r as usize
                } else {
                    x.ceil() as usize
                }
            })
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        let counts = self.counts();
        counts.iter().all(|&c| c == counts[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_weights_give_base_size() {
        let plan = AllocationPlan::constant(4, 100).unwrap();
        assert_eq!(plan.counts(), vec![100; 5]);
        assert!(plan.is_constant());
    }

    #[test]
    fn ceiling_of_scaled_weights() {
        let plan = AllocationPlan::new(10, vec![0.25, 1.0, 1.31]).unwrap();
        assert_eq!(plan.counts(), vec![3, 10, 14]);
        assert!(!plan.is_constant());
    }

    #[test]
    fn from_counts_round_trips() {
        let counts = [4, 3, 3, 4];
        assert_eq!(AllocationPlan::from_counts(&counts).unwrap().counts(), counts);
    }

    #[test]
    fn rejects_tiny_or_non_positive() {
        assert!(AllocationPlan::new(1, vec![1.0]).is_err());
        assert!(AllocationPlan::new(10, vec![1.0, 0.0]).is_err());
        assert!(AllocationPlan::new(10, vec![1.0, 0.1]).is_err());
        assert!(AllocationPlan::new(10, vec![]).is_err());
    }
}
