use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used for every randomized operation.
pub type StreamRng = ChaCha8Rng;

/// Seed plus stream selector. Streams with different `stream_id` under the
/// same `base_seed` are separate ChaCha keystreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        SeedSpec {
            base_seed,
            stream_id,
        }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        SeedSpec {
            base_seed: self.base_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
