//! Seed handling.
//!
//! Every stochastic stream is a ChaCha8 generator seeded from a 64-bit value.
//! Independent streams for parallel work are derived from a master seed with
//! [`stream_seed`], so a result depends only on `(master_seed, index)` and
//! never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`:
/// `mix(mix(master) + (index + 1) · 0x9E3779B97F4A7C15)`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    mix(mix(master).wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Seed for a named sub-purpose (for example "bootstrap") of a stream.
pub fn purpose_seed(seed: u64, purpose: &str) -> u64 {
    let tag = purpose.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    });
    mix(seed ^ tag)
}
