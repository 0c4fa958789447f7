//! Deterministic RNG substreams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is
//! derived from one 64-bit master seed and a path of tags (scene, frame,
//! agent, ...). Streams for different tags are independent, so frames can be
//! simulated in any order or in parallel and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a tag path into a child seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc.rotate_left(23) ^ splitmix64(t ^ 0xA076_1D64_78BD_642F)))
}

pub fn substream(seed: u64, tags: &[u64]) -> SimRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

/// Stream tags, kept distinct so e.g. scene layout and per-frame noise never alias.
pub mod tag {
    pub const LAYOUT: u64 = 1;
    pub const MOTION: u64 = 2;
    pub const DETECTION: u64 = 3;
    pub const ATTACK: u64 = 4;
    pub const ENGINE: u64 = 5;
    pub const PROBE: u64 = 6;
    pub const CALIBRATION: u64 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| substream(42, &[1, 2]).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(derive_seed(42, &[1, 2]), derive_seed(42, &[2, 1]));
        assert_ne!(derive_seed(42, &[1]), derive_seed(43, &[1]));
        assert_ne!(derive_seed(0, &[]), derive_seed(0, &[0]));
    }
}
