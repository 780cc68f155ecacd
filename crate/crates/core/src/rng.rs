//! Seeded random streams.
//!
//! Every stochastic routine draws from a ChaCha8 stream keyed by a user seed,
//! an optional sub-key and a stream number. Work is split into fixed-size
//! chunks, each with its own stream, so results do not depend on the number
//! of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for a plain seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator keyed by `(seed, key)`.
pub fn substream(seed: u64, key: u64, stream: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&key.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(bytes);
    rng.set_stream(stream);
    rng
}
