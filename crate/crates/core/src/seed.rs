//! Seed derivation and seeded generators.
//!
//! Every stochastic unit of work (a fold, a grid cell, a tree, a permutation
//! repeat) draws from its own generator seeded by hashing the master seed
//! with the unit's identifiers. Results therefore do not depend on the order
//! or the thread in which units run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Hash a master seed together with a path of identifiers into a new seed.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Like [`derive_seed`] with a trailing numeric identifier.
pub fn derive_indexed(master: u64, label: &str, index: usize) -> u64 {
    derive_seed(master, &[label, &index.to_string()])
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
