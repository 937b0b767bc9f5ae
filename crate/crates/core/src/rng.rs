//! Reproducible random-number plumbing.
//!
//! Every stochastic operation in the crate takes an explicit 64-bit seed and
//! is bit-stable given that seed. Parallel loops derive one independent seed
//! per work item.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic stream cipher RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for work item `index` under a base seed.
///
/// The index is spread over the full 64-bit space before mixing so that
/// nearby (seed, index) pairs never collide into the same stream.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Seed keyed by a point's coordinate bit patterns; used where no cell index
/// exists (e.g. predicting with a voting classifier at an arbitrary point).
pub fn derive_seed_from_point(base: u64, point: &[f64]) -> u64 {
    let mut acc = base;
    for (d, x) in point.iter().enumerate() {
        acc = splitmix64(acc ^ x.to_bits().wrapping_add(d as u64));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derived_seeds_do_not_collide_across_nearby_bases() {
        let mut seen = std::collections::HashSet::new();
        for base in 0..32u64 {
            for index in 0..1000u64 {
                assert!(seen.insert(derive_seed(base, index)));
            }
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let mut r1 = rng_from_seed(42);
        let mut r2 = rng_from_seed(42);
        assert_eq!(
            (0..8).map(|_| r1.next_u64()).collect::<Vec<_>>(),
            (0..8).map(|_| r2.next_u64()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn point_keyed_seed_depends_on_every_coordinate() {
        let s0 = derive_seed_from_point(7, &[0.1, 0.2]);
        assert_ne!(s0, derive_seed_from_point(7, &[0.1, 0.20000001]));
        assert_ne!(s0, derive_seed_from_point(7, &[0.2, 0.1]));
        assert_ne!(s0, derive_seed_from_point(8, &[0.1, 0.2]));
    }
}
