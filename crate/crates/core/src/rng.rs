//! Seeded random streams.
//!
//! Every run derives its randomness from a single 64-bit seed. The seed is
//! expanded with `ChaCha8Rng::seed_from_u64` and split into independent
//! ChaCha streams (the 64-bit stream id of the cipher), one per purpose, so
//! that changing how one stream is consumed never perturbs another. ChaCha8 is
//! a portable, platform-independent generator, which keeps traces
//! reproducible across machines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Synthetic instance generation (features and hidden parameter).
    Instance = 0,
    /// Reward draws from the environment.
    Reward = 1,
    /// Algorithmic randomness (exploratory arm draws).
    Algorithm = 2,
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
