//! Replicate seed derivation.
//!
//! `seed_for(base, k)` is a fixed composition of bijections on `u64`, so it is
//! injective in `k` for every base and never changes between releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer; a bijection on `u64`.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replicate `k` under base seed `base`.
#[inline]
pub fn seed_for(base: u64, k: u64) -> u64 {
    mix64(mix64(base).wrapping_add(k.wrapping_mul(GOLDEN)))
}

/// The generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
