//! Seeded random streams.
//!
//! Every random choice in the toolkit draws from a named substream derived
//! from the single run seed, so one component can be reconfigured or ablated
//! without perturbing the randomness seen by the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream names used across the toolkit.
pub mod stream {
    pub const FOLDS: &str = "folds";
    pub const WORD2VEC: &str = "word2vec";
    pub const SMOTE: &str = "smote";
    pub const CNN_INIT: &str = "cnn-init";
    pub const CNN_SHUFFLE: &str = "cnn-shuffle";
    pub const CNN_DROPOUT: &str = "cnn-dropout";
    pub const SGD_SHUFFLE: &str = "sgd-shuffle";
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive the 64-bit seed of a named substream.
pub fn substream_seed(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ fnv1a(name.as_bytes()))
}

/// A deterministic, portable RNG for the named substream of `seed`.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, name))
}

/// Substream further split by an index (fold number, class id, ...).
pub fn substream_indexed(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(substream_seed(seed, name) ^ splitmix64(index)))
}
