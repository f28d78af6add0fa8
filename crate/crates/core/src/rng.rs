//! Seed derivation and random stream construction.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded with a
//! 64-bit value obtained through [`derive_seed`]. Child seeds depend only on
//! `(parent, counter)`, never on execution order, so replicate `b` can be
//! regenerated on its own or on any worker.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Counter-based seed mixer.
///
/// `derive_seed(s, b)` is the SplitMix64 finalizer applied to
/// `s + b * 0x9E3779B97F4A7C15 (mod 2^64)`. The multiplier is odd, so the
/// affine step is a bijection in `b`, and the finalizer is a bijection on
/// `u64`; the map is therefore injective over every `b` for a fixed `s`.
pub fn derive_seed(master_seed: u64, b: u64) -> u64 {
    let mut z = master_seed.wrapping_add(b.wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sub-stream labels hung off a replicate seed.
pub mod streams {
    pub const OUTCOME_NOISE: u64 = 1;
    pub const MODEL_CV: u64 = 2;
    /// Replicate-sized counters never reach this value.
    pub const TEST_OUTCOME: u64 = 1 << 40;
}
