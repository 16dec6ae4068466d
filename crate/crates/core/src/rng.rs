//! Reproducible random streams.
//!
//! Every stream is identified by `(experiment seed, trial index, lane)`. The
//! lane separates independent purposes within one trial (graph, message,
//! channel noise) so that, for example, the channel noise of trial 17 does
//! not depend on how many bits the encoder of trial 17 consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Lane {
    Graph = 1,
    Message = 2,
    Noise = 3,
    Fading = 4,
    Selftest = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 keyed by `(seed, lane)`, on stream number `trial`.
pub fn stream(seed: u64, trial: u64, lane: Lane) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(lane as u64)));
    rng.set_stream(trial);
    rng
}

/// A 64-bit seed derived from `(seed, trial, lane)`; used where a bare seed is
/// shared between parties (the LT graph seed known to encoder and decoder).
pub fn derived_seed(seed: u64, trial: u64, lane: Lane) -> u64 {
    use rand::RngCore;
    stream(seed, trial, lane).next_u64()
}
