//! Deterministic random streams.
//!
//! Every replication of an experiment draws from its own ChaCha stream keyed by
//! `(master_seed, replication_index)`, so results never depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// The RNG for a single run seeded with `seed`.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under `master_seed`.
pub fn replication_stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// A per-replication seed derived from the master seed, for APIs that take a
/// plain `u64` (e.g. an `AlgoConfig`).
pub fn replication_seed(master_seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
