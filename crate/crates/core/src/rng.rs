//! Reproducible random streams.
//!
//! A single global 64-bit seed is split into per-task seeds by a counter-based
//! derivation: task `i` receives `splitmix64(global + (i + 1) * 0x9E3779B97F4A7C15)`.
//! Each derived seed keys a ChaCha20 generator. Because the derivation only
//! depends on `(global, i)`, results never depend on how tasks are scheduled
//! across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of task `index` under the global seed.
pub fn derive_seed(global: u64, index: u64) -> u64 {
    splitmix64(global.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha20Rng::seed_from_u64(seed)
}
