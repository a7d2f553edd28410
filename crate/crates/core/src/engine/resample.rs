use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

/// Draws `count` i.i.d. indices from the categorical distribution with
/// probabilities proportional to `weights`.
///
/// Sampling uses Walker's alias method (`rand_distr::weighted::WeightedAliasIndex`):
/// `O(m)` setup and `O(1)` per draw.
pub fn multinomial_resample<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::Config("no weights to resample from".into()));
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidWeight { index, value });
    }
    Ok(draw_ancestors(weights, count, rng))
}

/// `weights` must be finite, non-negative, with a positive sum. Relative
/// weights that underflowed to zero are allowed here.
pub(crate) fn draw_ancestors<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let table = WeightedAliasIndex::new(weights.to_vec()).expect("weights validated by caller");
    (0..count).map(|_| table.sample(rng)).collect()
}
