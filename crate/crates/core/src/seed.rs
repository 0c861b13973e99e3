//! Seed derivation.
//!
//! Every random stream in an experiment is derived from a single master seed
//! with splitmix64 over a labelled path, e.g. `("run", 3)` or
//! `("kmeans", "sphere-d2-i1")`. Labels are hashed with SHA-256 so the mapping
//! is stable across platforms and toolchains. Adding a new algorithm or
//! problem never changes the seeds of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One splitmix64 output step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit digest of a string label.
pub fn label_hash(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Derive a child seed from `parent` and a label.
pub fn derive(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ label_hash(label))
}

/// Derive a child seed from `parent`, a label, and an index.
pub fn derive_indexed(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(parent, label).wrapping_add(GOLDEN_GAMMA.wrapping_mul(index + 1)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference splitmix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(GOLDEN_GAMMA), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_indexed(42, "run", 0);
        let b = derive_indexed(42, "run", 1);
        assert_ne!(a, b);
        assert_eq!(a, derive_indexed(42, "run", 0));
        assert_ne!(derive(42, "kmeans"), derive(42, "run"));
    }
}
