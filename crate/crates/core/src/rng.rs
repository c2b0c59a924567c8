//! Seeded, stream-separated random number generators.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for sub-task `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent seed for sub-task `salt` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    stream_rng(seed, salt.wrapping_add(1)).next_u64()
}
