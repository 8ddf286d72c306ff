//! Named, seed-derived random streams.
//!
//! Every randomized kernel draws from `stream(seed, stage, index)`. The
//! stream for a given triple is fixed, so results do not depend on how
//! iterations are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// RNG for iteration `index` of `stage` under the run seed `seed`.
pub fn stream(seed: u64, stage: &str, index: u64) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((stage.len() as u64).to_le_bytes());
    hasher.update(stage.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}
