//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a 64-bit value derived here, so results never depend on
//! iteration order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds `parts` into `seed`, one splitmix64 round per part:
/// `s ← splitmix64(s ⊕ splitmix64(part))`.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |s, &p| splitmix64(s ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags, kept distinct so no two purposes share a derived seed.
pub mod stream {
    pub const TRAIN: u64 = 1;
    pub const VAL: u64 = 2;
    pub const PEXP: u64 = 3;
    pub const NOISE: u64 = 10;
    pub const INIT: u64 = 20;
    pub const SHUFFLE: u64 = 21;
    pub const AUGMENT: u64 = 22;
    pub const SEARCH: u64 = 30;
}
