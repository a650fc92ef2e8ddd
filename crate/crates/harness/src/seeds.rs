//! One master seed fans out to independent named streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    /// Episode reset seeds for training rollouts.
    Env = 1,
    /// Network initialization.
    Init = 2,
    /// Action noise, minibatch sampling and shuffling.
    Rollout = 3,
    /// Evaluation episode seeds.
    Eval = 4,
}

pub fn substream(seed: u64, which: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
