//! Seeded randomness helpers. Everything in this crate draws from
//! ChaCha8 streams so runs are reproducible across platforms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::feature::FeatureVector;

/// Deterministic RNG for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task of a seeded computation.
///
/// splitmix64 finalizer; distinct salts give uncorrelated streams.
pub fn sub_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform point in [0,1]^d.
pub fn uniform_point(rng: &mut ChaCha8Rng, d: usize) -> FeatureVector {
    (0..d).map(|_| rng.gen::<f64>()).collect()
}

/// `n` uniform points in [0,1]^d from a fresh stream.
pub fn uniform_points(seed: u64, n: usize, d: usize) -> Vec<FeatureVector> {
    let mut r = rng(seed);
    (0..n).map(|_| uniform_point(&mut r, d)).collect()
}
