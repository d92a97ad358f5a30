//! Deterministic random streams.
//!
//! Every consumer of randomness takes a `(seed, stream)` pair. Workers that
//! shard a sweep use their shard index as the stream id, so results do not
//! depend on the number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default seed used by the CLI and sweeps when none is given.
pub const DEFAULT_SEED: u64 = 20_200_101;

/// An independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
