//! Counter-based random streams.
//!
//! A [`RngSeed`] names one ChaCha8 keystream: the master seed is the key and
//! the stream id selects an independent 64-bit nonce. Draw `t` of a posterior
//! sample always reads stream `t`, so results do not depend on the order in
//! which draws are computed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub master: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(master: u64) -> Self {
        Self { master, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// A child seed for a labelled sub-task (replication index, purpose tag).
    /// Children of distinct labels get unrelated keys.
    pub fn derive(self, label: u64) -> Self {
        let parent = splitmix64(self.master ^ splitmix64(self.stream));
        let key = splitmix64(parent ^ splitmix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        Self { master: key, stream: 0 }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
