//! Seeded, splittable random streams.
//!
//! Every sampling routine in the crate takes its generator explicitly. Runs are
//! reproducible from a single `u64` seed; independent replications get their own
//! ChaCha stream so they can run in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The generator used by the drivers.
pub type SimRng = ChaCha12Rng;

/// Generator for the main stream of `seed`.
pub fn seeded(seed: u64) -> SimRng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Generator for an independent sub-stream of `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
