//! Deterministic randomness plumbing.
//!
//! Every random draw in this crate flows through an explicit counter-based
//! generator (ChaCha8) that callers seed and pass by reference; there is no
//! global RNG. Two runs with the same seed therefore make identical draws,
//! which is what makes trajectory outputs byte-reproducible.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// The generator used throughout the crate.
pub type RunRng = rand_chacha::ChaCha8Rng;

/// Builds a generator from a 64-bit seed.
pub fn seeded(seed: u64) -> RunRng {
    RunRng::seed_from_u64(seed)
}

/// Derives a decorrelated child seed for concurrent sub-experiments
/// (SplitMix64 finalizer, so adjacent indices do not produce related streams).
pub fn child_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One standard normal draw.
pub fn standard_normal(rng: &mut RunRng) -> f64 {
    rng.sample(StandardNormal)
}

/// One Exp(1) draw, used for Dirichlet sampling.
pub fn standard_exponential(rng: &mut RunRng) -> f64 {
    // 1 - U is in (0, 1], so the log never sees zero.
    -(1.0 - rng.random::<f64>()).ln()
}
