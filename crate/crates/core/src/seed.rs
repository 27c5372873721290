//! Deterministic seed derivation.
//!
//! Every random draw in the crate is keyed by a seed derived from a base seed
//! and a path of integers (configuration id, sample sizes, repetition index,
//! ...). The mixing function is SplitMix64's finalizer, which is fixed and
//! portable, so traces are reproducible across platforms and toolchains.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and an ordered path of components.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = mix(base.wrapping_add(GOLDEN));
    for &component in path {
        state = mix(state ^ mix(component.wrapping_add(GOLDEN)));
    }
    state
}

/// Hashes a string into a seed component (FNV-1a).
pub fn str_component(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
