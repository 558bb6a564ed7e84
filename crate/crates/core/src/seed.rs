//! Labeled seed derivation.
//!
//! All randomness in an experiment flows from one root seed. Each consumer
//! (fold split, SVR coordinate order, LSTM init, dropout, ...) draws from its
//! own stream keyed by a label, so adding a consumer never perturbs others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent seed from `root` and `label`.
pub fn derive(root: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(root: u64, label: &str) -> ChaCha8Rng {
    rng(derive(root, label))
}
