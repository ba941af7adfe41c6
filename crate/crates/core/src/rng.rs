//! Seeded random streams.
//!
//! Every consumer that needs randomness keyed by an index (node `i`,
//! bootstrap replicate `r`, Monte-Carlo chunk `c`) derives an independent
//! stream from `(seed, index)` through a SplitMix64 avalanche. Work can then
//! be split across any number of threads without changing the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the substream keyed by `key` under `seed`.
#[inline]
pub fn substream_seed(seed: u64, key: u64) -> u64 {
    mix64(seed ^ mix64(key.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn substream(seed: u64, key: u64) -> Stream {
    Stream::seed_from_u64(substream_seed(seed, key))
}

pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(mix64(seed))
}
