//! Seeded, portable random streams.
//!
//! All randomness in the crate flows through ChaCha8 seeded from a `u64`.
//! Independent streams for different purposes are derived from a base
//! seed plus a short role tag, so that e.g. the coefficient matrix and
//! the noise matrix of one instance never share a stream. The derivation
//! is a fixed hash (FNV-1a over the tag, folded into the seed, finished
//! with a SplitMix64 round), so streams are reproducible bit-for-bit
//! across platforms and runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a stream seed from a base seed and a role tag.
pub fn derive_seed(seed: u64, role: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in role.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

/// A ChaCha8 generator for the given (seed, role) stream.
pub fn stream(seed: u64, role: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, role))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
