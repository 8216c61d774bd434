//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `seed_from_u64(seed)` (the seed is
//! expanded to the 256-bit key with PCG32, as documented by `rand_core`) and
//! positioned on ChaCha stream `stream`. Streams are therefore reproducible from
//! `(seed, stream)` alone and independent of call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids used by the library, kept apart so that e.g. the observation noise
/// never shares draws with a truth field drawn from the same seed.
pub mod streams {
    pub const TRUTH_FIELD: u64 = 1;
    pub const OBSERVATION_NOISE: u64 = 2;
    pub const ENSEMBLE_INIT: u64 = 3;
    pub const ENSEMBLE_PERTURB: u64 = 4;
    pub const MC_NORMAL: u64 = 10;
    pub const MC_LOGNORMAL: u64 = 11;
    pub const MC_UNIFORM: u64 = 12;
}
