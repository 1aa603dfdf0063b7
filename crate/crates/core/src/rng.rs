//! Seeded random streams.
//!
//! All randomness comes from ChaCha20, a counter-based generator: a 64-bit
//! seed plus a stream id select an independent keystream, so initialization,
//! data shuffling and sampling never share state even under the same seed.

use rand::SeedableRng;
pub use rand_chacha::ChaCha20Rng;

/// Name recorded in run metadata.
pub const ALGORITHM: &str = "ChaCha20";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Shuffle = 1,
    Sample = 2,
    Gauge = 3,
    Experiment = 4,
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
