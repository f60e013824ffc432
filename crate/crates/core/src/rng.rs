//! Deterministic seed derivation.
//!
//! Every random quantity in the crate draws from a `ChaCha8` stream whose
//! seed is derived from one master seed plus a path of integer labels
//! (design, setting, replicate, purpose, ...). Streams are therefore
//! independent of evaluation order and thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, stable across platforms.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a label path into one derived seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &part in path {
        state = splitmix64(state ^ splitmix64(part.wrapping_add(0xa076_1d64_78bd_642f)));
    }
    state
}

/// Seeded generator for the given label path.
pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Purpose labels used in derivation paths.
pub mod purpose {
    pub const SIMULATE: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const SUBSAMPLES: u64 = 3;
    pub const RESAMPLE: u64 = 4;
}
