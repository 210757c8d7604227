//! Seeded random number streams.
//!
//! Every stochastic routine takes its generator from the caller. Parallel
//! work derives one independent stream per task from a master seed with
//! SplitMix64, so results depend only on the master seed and task index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TorusRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TorusRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child seed for task `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
