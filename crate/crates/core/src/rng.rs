//! Random number streams.
//!
//! Every run draws from [`SmcRng`], the ChaCha stream cipher with 8 rounds
//! (`rand_chacha::ChaCha8Rng`). Given the same seed and the same crate
//! versions (pinned by `Cargo.lock`), a run is bit-reproducible.
//!
//! Independent runs derived from one master seed (replicates, adaptive
//! stages) use [`derive_seed`]: the child seed for `index` is
//! `splitmix64(seed ^ splitmix64(index + 0x9E3779B97F4A7C15))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SmcRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SmcRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th child stream of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Generator for the `index`-th child stream of `seed`.
pub fn child(seed: u64, index: u64) -> SmcRng {
    seeded(derive_seed(seed, index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
