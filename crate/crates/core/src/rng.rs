//! Seeded random number generation. Every stochastic operation in this crate
//! takes an explicit seed and derives its stream here, so identical inputs
//! give bit-identical outputs on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-purpose of a run (matrix draw,
/// channel noise, shuffling, ...) without correlating the streams.
pub fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
