use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derives independent, reproducible random streams from one root seed.
///
/// Each labeled substream is a ChaCha12 generator keyed by
/// SHA-256(root_seed_le_bytes || label), so adding or removing one consumer
/// never perturbs the draws seen by any other, and the same (seed, label)
/// pair always replays the same sequence on every platform.
#[derive(Debug, Clone, Copy)]
pub struct Seeder {
    root: u64,
}

impl Seeder {
    pub fn new(root: u64) -> Self {
        Seeder { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// A fresh generator for the given substream label.
    pub fn stream(&self, label: &str) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.root.to_le_bytes());
        hasher.update(label.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        ChaCha12Rng::from_seed(digest)
    }
}
