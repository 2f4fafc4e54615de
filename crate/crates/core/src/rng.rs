//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`Stream`], a ChaCha20
//! generator. Child seeds are derived per index with SplitMix64, so trial
//! `i` of an experiment sees the same stream no matter how many trials run
//! or in which order they are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// The generator used throughout the crate.
pub type Stream = ChaCha20Rng;

/// Builds a generator from a 64-bit seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha20Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child `index` from `parent`.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Generator for child `index` of `parent`.
pub fn child_stream(parent: u64, index: u64) -> Stream {
    stream(child_seed(parent, index))
}
