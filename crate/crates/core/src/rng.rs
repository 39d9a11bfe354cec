//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha12 stream keyed by a
//! [`StreamKey`]. The 64-bit seed expands into the cipher key and the
//! `(experiment, replicate)` pair selects the 64-bit stream id, so two keys
//! that differ in any component yield independent, non-overlapping streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub experiment: u32,
    pub replicate: u32,
}

impl StreamKey {
    pub fn new(seed: u64, experiment: u32, replicate: u32) -> Self {
        Self {
            seed,
            experiment,
            replicate,
        }
    }

    /// The 64-bit ChaCha stream id: experiment in the high word, replicate in the low word.
    pub fn stream_id(&self) -> u64 {
        (u64::from(self.experiment) << 32) | u64::from(self.replicate)
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id());
        rng
    }

    pub fn with_replicate(self, replicate: u32) -> Self {
        Self { replicate, ..self }
    }
}

impl From<u64> for StreamKey {
    fn from(seed: u64) -> Self {
        Self::new(seed, 0, 0)
    }
}
