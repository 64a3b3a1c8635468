//! Seeded random generators.
//!
//! Every stochastic routine takes a `u64` seed and builds a [`ChaCha8Rng`]
//! from it, so results are identical across platforms and runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds several stream identifiers into one derived seed.
pub fn derive_many(seed: u64, streams: &[u64]) -> u64 {
    streams.iter().fold(seed, |acc, &s| derive(acc, s))
}
