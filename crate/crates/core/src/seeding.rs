//! Deterministic RNG derivation.
//!
//! Every stochastic stage derives an independent ChaCha8 stream from the
//! master seed plus a list of context keys (replica index, entity ids, ...).
//! Streams therefore do not depend on iteration order or thread count, and
//! the same `(seed, keys)` always reproduces the same draws on any platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a; stable across platforms, used to key streams by string ids.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent RNG stream for `(master_seed, keys...)`.
pub fn derive_rng(master_seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut acc = splitmix64(master_seed);
    for &k in keys {
        acc = splitmix64(acc ^ k);
    }
    let mut seed = [0u8; 32];
    let mut x = acc;
    for chunk in seed.chunks_exact_mut(8) {
        x = splitmix64(x);
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_keys_same_stream() {
        let mut a = derive_rng(42, &[1, fnv1a64(b"I007")]);
        let mut b = derive_rng(42, &[1, fnv1a64(b"I007")]);
        let va: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.random()).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn different_keys_different_streams() {
        let mut a = derive_rng(42, &[1]);
        let mut b = derive_rng(42, &[2]);
        let mut c = derive_rng(43, &[1]);
        let va: u64 = a.random();
        assert_ne!(va, b.random::<u64>());
        assert_ne!(va, c.random::<u64>());
    }

    #[test]
    fn fnv_is_stable() {
        // Frozen reference values guard against accidental algorithm drift.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
