//! Seed derivation and the portable random stream used for permutations.
//!
//! Every random decision in the toolkit flows from a 64-bit seed. Recorded
//! seeds must replay the same constraint orderings on any platform and any
//! future version of this crate, so the algorithms here are fixed:
//!
//! * **Seed derivation**: SHA-256 over the length-prefixed byte encoding of
//!   each part (`u64` little-endian length, then the bytes); the first eight
//!   digest bytes read as a little-endian `u64`.
//! * **Stream**: ChaCha8 keyed through `SeedableRng::seed_from_u64`, whose
//!   output is value-stable across `rand_chacha` releases.
//! * **Bounded integers**: rejection sampling on raw `next_u64` output, see
//!   [`uniform_below`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator behind every permutation and synthetic draw.
pub type StreamRng = ChaCha8Rng;

/// Opens the stream for `seed`.
pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hashes an ordered list of byte strings into a 64-bit seed.
pub fn derive_seed(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Uniform integer in `0..n` without modulo bias.
///
/// Draws are rejected while they fall in the final partial block of
/// `u64::MAX + 1` modulo `n`, then reduced with `%`.
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    assert!(n > 0, "uniform_below needs a non-empty range");
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % n;
        }
    }
}

/// Uniform real in `[0, 1)` with 53 random mantissa bits.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_order_and_boundary_sensitive() {
        let a = derive_seed(&[b"ab", b"c"]);
        let b = derive_seed(&[b"a", b"bc"]);
        let c = derive_seed(&[b"c", b"ab"]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(&[b"ab", b"c"]));
    }

    #[test]
    fn stream_is_value_stable() {
        // Frozen outputs; a change here breaks replay of recorded seeds.
        let mut rng = stream(42);
        let first: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(
            first,
            [0xae90bfb5395d5ba1, 0xf3453fc625799188, 0x6d71b708c5b6538c]
        );
        assert_eq!(derive_seed(&[b"disposition"]), 0xf5f8eb5225fee33e);
    }

    #[test]
    fn uniform_below_stays_in_range() {
        let mut rng = stream(7);
        for n in [1u64, 2, 3, 7, 200, u64::MAX] {
            for _ in 0..200 {
                assert!(uniform_below(&mut rng, n) < n);
            }
        }
    }

    #[test]
    fn unit_f64_is_half_open() {
        let mut rng = stream(9);
        for _ in 0..10_000 {
            let u = unit_f64(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
