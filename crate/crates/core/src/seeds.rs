//! Hierarchical seed derivation.
//!
//! `derive_seed(parent, stream)` is one SplitMix64 output step applied to
//! `parent ^ golden·(stream + 1)`. Distinct `(parent, stream)` pairs give
//! statistically independent child seeds, and the function is stable across
//! platforms and releases.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `stream` of `parent`.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    mix64(parent ^ GOLDEN.wrapping_mul(stream.wrapping_add(1)))
}

/// Seed of the perturbation draws belonging to a noise seed.
pub fn delta_seed(noise_seed: u64) -> u64 {
    derive_seed(noise_seed, 0xD17A)
}
