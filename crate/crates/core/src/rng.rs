//! Stateless 64-bit mixing used to derive every random decision in the
//! synthetic games from `(seed, node key, stream tag)`.
//!
//! Nothing here keeps state, so a node's draws do not depend on the order in
//! which nodes are visited or on which other nodes were ever queried.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tag for the designated optimal child of a choice node.
pub const TAG_DESIGNATED: u64 = 0xD5A6_1266_F0C9_392C;
/// Stream tag for the per-child flip decisions.
pub const TAG_FLIP: u64 = 0xA0F9_5E4B_1B3C_77D1;
/// Stream tag for per-group cost draws in prefix value trees.
pub const TAG_COST: u64 = 0x3C6E_F372_FE94_F82B;
/// Stream tag for heuristic noise keyed by node.
pub const TAG_EVAL: u64 = 0x510E_527F_ADE6_82D1;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of the root node for a given instance seed.
#[inline]
pub fn root_key(seed: u64) -> u64 {
    mix64(seed ^ 0x6A09_E667_F3BC_C908)
}

/// Key of child `index` of a node with key `parent`.
#[inline]
pub fn child_key(parent: u64, index: u32) -> u64 {
    mix64(parent.wrapping_add(GOLDEN.wrapping_mul(u64::from(index) + 1)))
}

/// Raw 64-bit draw `j` of stream `tag` at a node.
#[inline]
pub fn draw(key: u64, tag: u64, j: u64) -> u64 {
    mix64(mix64(key ^ tag).wrapping_add(GOLDEN.wrapping_mul(j.wrapping_add(1))))
}

/// Uniform real in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `[0, n)` by multiply-shift.
#[inline]
pub fn below(x: u64, n: u32) -> u32 {
    ((u128::from(x) * u128::from(n)) >> 64) as u32
}

/// Combine several words into one seed, order-sensitive.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |h, &p| mix64(h ^ mix64(p.wrapping_add(GOLDEN))))
}

/// A portable generator seeded from a derived word.
pub fn stream_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_is_a_bijection_on_samples() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000u64 {
            assert!(seen.insert(mix64(i)));
        }
    }

    #[test]
    fn below_stays_in_range() {
        for i in 0..1000u64 {
            assert!(below(mix64(i), 7) < 7);
        }
        assert_eq!(below(u64::MAX, 3), 2);
        assert_eq!(below(0, 3), 0);
    }

    #[test]
    fn unit_is_half_open() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }

    #[test]
    fn derive_seed_is_order_sensitive() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_eq!(derive_seed(&[1, 2]), derive_seed(&[1, 2]));
    }
}
