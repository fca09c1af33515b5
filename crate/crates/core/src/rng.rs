//! Seed plumbing. Every stochastic component owns a [`ChaCha8Rng`] derived
//! from an experiment seed and a stream label, so results do not depend on
//! the order components are constructed in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a base seed with a stream identifier.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix64(mix64(base) ^ stream.rotate_left(17))
}

pub fn rng_from(base: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(base, stream))
}

/// Stream labels used across the crate.
pub mod stream {
    pub const WORLD: u64 = 1;
    pub const PERCEPTION: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const LEARNER: u64 = 4;
    pub const REPLAY: u64 = 5;
    pub const INIT: u64 = 6;
}
