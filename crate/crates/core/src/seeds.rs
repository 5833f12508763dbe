//! Seed derivation.
//!
//! Every random quantity in the toolkit is addressed by a base seed plus a
//! short tuple of tags (purpose, server, individual, ...). Tags are folded
//! into a 64-bit key with the SplitMix64 finalizer, and the key seeds a
//! ChaCha8 stream. Because streams are addressed rather than consumed in
//! order, results do not depend on thread scheduling, and individual `i` of
//! a server sees the same draws whether the server holds 50 or 800 people.
//!
//! Rademacher signs of the random curves are drawn directly from the key
//! (no stream), so a curve with 2^16 coefficients can be evaluated at a
//! handful of points without materialising all of its signs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Values are part of the reproducibility contract.
pub mod tag {
    pub const CURVE: u64 = 0x11;
    pub const DESIGN: u64 = 0x22;
    pub const NOISE: u64 = 0x33;
    pub const PRIVACY: u64 = 0x44;
    pub const AUDIT: u64 = 0x55;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `tags` into `seed`.
#[inline]
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(seed.wrapping_add(GOLDEN)), |acc, &t| {
        mix64(acc ^ mix64(t.wrapping_add(GOLDEN)))
    })
}

pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tags))
}

/// Uniform in [0, 1) from the top 53 bits of a key.
#[inline]
pub fn unit_from_key(key: u64) -> f64 {
    (key >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// +1 with probability `p`, -1 otherwise; fully determined by `key`.
#[inline]
pub fn rademacher(key: u64, p: f64) -> f64 {
    if unit_from_key(mix64(key)) < p {
        1.0
    } else {
        -1.0
    }
}

/// Replication seed: the base seed xor the replication index.
#[inline]
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    base ^ rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_is_order_sensitive() {
        assert_ne!(derive(1, &[2, 3]), derive(1, &[3, 2]));
        assert_eq!(derive(1, &[2, 3]), derive(1, &[2, 3]));
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(9, &[1]), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(9, &[1]), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn rademacher_frequency() {
        let hits = (0..100_000u64)
            .filter(|&i| rademacher(derive(5, &[i]), 0.9) > 0.0)
            .count();
        let freq = hits as f64 / 100_000.0;
        assert!((freq - 0.9).abs() < 0.005, "{freq}");
    }

    #[test]
    fn degenerate_rademacher() {
        for i in 0..1000 {
            assert_eq!(rademacher(i, 1.0), 1.0);
            assert_eq!(rademacher(i, 0.0), -1.0);
        }
    }
}
