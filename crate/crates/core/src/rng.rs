//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` whose seed is derived
//! from a master seed and a small path of stream identifiers, so that
//! independent consumers never share a stream and results do not depend on
//! call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used across the crate.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const BATCHES: u64 = 2;
    pub const SUBSAMPLE: u64 = 3;
    pub const GMM_TRAIN: u64 = 4;
    pub const GMM_TEST: u64 = 5;
    pub const HOLDOUT: u64 = 6;
    pub const DEVIATION: u64 = 7;
    pub const CLASSIFIER_REINIT: u64 = 8;
    pub const GMM_MEANS: u64 = 9;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(master: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, path))
}
