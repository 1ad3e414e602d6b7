//! Deterministic seed derivation.
//!
//! Every randomized operation in the crate takes an explicit 64-bit seed and
//! expands it with ChaCha8, which has a stable stream across platforms and
//! crate versions. Sub-seeds are derived by hashing the parent seed with a
//! purpose tag so that independent pipeline stages never share a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the parent seed, a purpose tag, and an index.
///
/// Cheap, stable, and good enough to decorrelate ChaCha streams (the heavy
/// mixing happens inside ChaCha itself).
pub fn derive_seed(parent: u64, tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for b in parent.to_le_bytes() {
        eat(b);
    }
    for b in tag.as_bytes() {
        eat(*b);
    }
    for b in index.to_le_bytes() {
        eat(b);
    }
    h
}

/// Seeded generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_seed_is_stable_and_tag_sensitive() {
        let a = derive_seed(42, "noise", 0);
        let b = derive_seed(42, "noise", 0);
        assert_eq!(a, b);
        assert_ne!(a, derive_seed(42, "noise", 1));
        assert_ne!(a, derive_seed(42, "field", 0));
        assert_ne!(a, derive_seed(43, "noise", 0));
    }

    #[test]
    fn rng_streams_are_reproducible() {
        let mut r1 = rng_from_seed(7);
        let mut r2 = rng_from_seed(7);
        for _ in 0..16 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
    }
}
