//! Seeded random number streams.
//!
//! Every sampler in the crate draws from a ChaCha stream keyed by a user
//! seed plus a stream index. Scenario `i` always reads stream `i` from the
//! start, so output is identical whether scenarios are generated serially
//! or in parallel, and is bitwise reproducible for a fixed seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for one logical substream of a seeded computation.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed for a nested computation (e.g. one backtest roll).
///
/// SplitMix64 finalizer; cheap and well mixed so that nearby labels give
/// unrelated child seeds.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
