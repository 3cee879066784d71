//! Seed derivation and the deterministic generators used across the harness.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` seeded through
//! [`derive`], so results are reproducible across platforms and independent
//! of thread scheduling. Gaussian draws use the ziggurat sampler from
//! `rand_distr::StandardNormal` on top of that stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// The generator type used everywhere in the harness.
pub type HarnessRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream index.
pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Derives a child seed from a parent seed and a short path of indices.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |acc, &p| derive(acc, p))
}

pub fn rng(seed: u64) -> HarnessRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One standard-normal draw keyed by `(seed, stream)`.
pub fn gaussian(seed: u64, stream: u64) -> f64 {
    let mut r = rng(derive(seed, stream));
    StandardNormal.sample(&mut r)
}
