//! Seed handling.
//!
//! Every command owns a single root seed. Independent streams (per series,
//! per run, weight init versus batch sampling) are derived with
//! [`derive`], which mixes the root seed and a stream index through the
//! SplitMix64 finaliser. A stream's output therefore depends only on
//! `(root, stream)`, never on the order in which streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for stream `stream` of root seed `root`.
pub fn derive(root: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(root) ^ stream.wrapping_mul(0xD134_2543_DE82_EF95))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(root: u64, stream: u64) -> Rng {
    rng(derive(root, stream))
}

/// Stream indices used across the crate.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const BATCHES: u64 = 2;
    pub const FORECAST: u64 = 3;
    pub const SERIES_BASE: u64 = 1 << 32;
}
