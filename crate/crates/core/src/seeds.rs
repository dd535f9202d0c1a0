//! Named random streams derived from one master seed.
//!
//! Each component asks for its stream by name (and an index for per-trial or
//! per-rollout streams), so adding a consumer never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedSplitter {
    master: u64,
}

impl SeedSplitter {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn seed(&self, name: &str, index: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(self.master.to_le_bytes());
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update(index.to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn rng(&self, name: &str, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed(name, index))
    }

    /// A splitter rooted at one named stream, for handing to a sub-component.
    pub fn child(&self, name: &str, index: u64) -> SeedSplitter {
        SeedSplitter::new(self.seed(name, index))
    }
}
