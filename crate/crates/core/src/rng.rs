//! Seeded random streams.
//!
//! Every draw comes from a ChaCha20 generator keyed by the user seed, with the
//! 64-bit stream id set to a fixed purpose code. Draws for different purposes
//! (design, noise, coefficients, ...) are therefore independent and stable no
//! matter the order in which they are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream identifiers. Values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Design = 1,
    Noise = 2,
    Coefficients = 3,
    Latent = 4,
    FeatureMap = 5,
    Projection = 6,
    Split = 7,
    TestDesign = 8,
    TestNoise = 9,
    Attack = 10,
    Heuristic = 11,
    Probe = 12,
    Folds = 13,
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Seed of repetition `index` derived from a base seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03))
        ^ index
}

/// Stream for purpose `purpose`, sub-indexed by `index` (e.g. a repetition).
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha20Rng {
    stream(derive_seed(seed, index), purpose)
}
