//! Deterministic seed derivation.
//!
//! Every stochastic component draws from a `ChaCha8Rng` whose seed is a pure
//! function of a parent seed and a list of counters, so results never depend
//! on execution order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SmcRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `parent` with `counters` into a child seed.
pub fn derive_seed(parent: u64, counters: &[u64]) -> u64 {
    counters.iter().fold(splitmix64(parent), |acc, &c| {
        splitmix64(acc ^ splitmix64(c))
    })
}

pub fn rng_from(parent: u64, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, counters))
}
