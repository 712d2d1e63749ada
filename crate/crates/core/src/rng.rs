//! Seed stream splitting.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded by
//! `derive_seed(root, tag, index)`. The tag names the purpose of the stream
//! (`"init"`, `"draw"`, `"gibbs"`, ...) and the index separates repeated uses
//! of the same purpose (update number, example number, timestep). The mixing
//! is a fixed FNV-1a hash of the tag followed by SplitMix64 finalisation, so
//! the derived seeds are identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derive a child seed from `(root, tag, index)`.
pub fn derive_seed(root: u64, tag: &str, index: u64) -> u64 {
    let h = splitmix64(root ^ fnv1a(tag));
    splitmix64(h ^ splitmix64(index))
}

/// A ChaCha8 stream for `(root, tag, index)`.
pub fn stream(root: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tag, index))
}
