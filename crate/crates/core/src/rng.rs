//! Seed derivation. Every random stream in the lab is a ChaCha8 generator
//! seeded from an explicit root seed mixed with a tuple of indices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type LabRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a sequence of indices into a new 64-bit seed.
pub fn derive_seed(root: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(root: u64, parts: &[u64]) -> LabRng {
    LabRng::seed_from_u64(derive_seed(root, parts))
}

// Stream labels keep unrelated consumers of one root seed apart.
pub const STREAM_TRAIN: u64 = 1;
pub const STREAM_INIT: u64 = 2;
pub const STREAM_EVAL: u64 = 3;
pub const STREAM_BENCH: u64 = 4;
pub const STREAM_ORACLE: u64 = 5;
