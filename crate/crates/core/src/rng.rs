//! Seeded random streams.
//!
//! ChaCha8 gives a portable, platform-independent stream, so a seed fully
//! determines every draw of a run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SolverRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (e.g. one repetition of a
/// Monte-Carlo loop) from a base seed.
pub fn substream(seed: u64, stream: u64) -> SolverRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
