//! Labeled seed derivation.
//!
//! A single master seed fans out to independent per-stage generators via a
//! hash of `(seed, label)`, so any stage can be re-run in isolation without
//! disturbing the streams of the others.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derive a 32-byte seed from a master seed and a stage label.
pub fn derive_seed(master_seed: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(label.as_bytes());
    hasher.finalize().into()
}

/// Deterministic generator for the stage named by `label`.
pub fn derive_rng(master_seed: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(master_seed, label))
}
