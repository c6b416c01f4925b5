//! Seed derivation.
//!
//! Every random stream in the crate is derived from one master seed, a stream
//! name, and an item index:
//!
//! ```text
//! seed(master, stream, index) = splitmix64(splitmix64(master ^ fnv1a(stream)) ^ index)
//! ```
//!
//! A trial, restart, or ordering therefore draws the same numbers whether it
//! runs serially or on a worker thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream names used by the analyses. Changing any of them changes results.
pub mod streams {
    pub const SUBSAMPLE: &str = "subsample";
    pub const ROBUSTNESS: &str = "robustness";
    pub const NULL_TRIAL: &str = "null-trial";
    pub const ML_RESTART: &str = "ml-restart";
    pub const TRIPLE_ORDERING: &str = "triple-ordering";
    pub const INFLUENCE_MC: &str = "influence-mc";
    pub const SIMULATE: &str = "simulate";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Derive the seed for item `index` of the named stream.
pub fn derive(master: u64, stream: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(stream)) ^ index)
}

/// The generator used everywhere in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shorthand for `rng(derive(master, stream, index))`.
pub fn stream_rng(master: u64, stream: &str, index: u64) -> ChaCha8Rng {
    rng(derive(master, stream, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_and_indices_separate() {
        assert_ne!(derive(1, "a", 0), derive(1, "b", 0));
        assert_ne!(derive(1, "a", 0), derive(1, "a", 1));
        assert_ne!(derive(1, "a", 0), derive(2, "a", 0));
        assert_eq!(derive(7, "a", 3), derive(7, "a", 3));
    }
}
