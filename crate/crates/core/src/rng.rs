//! Reproducible random streams.
//!
//! Every particle draws from its own ChaCha stream, addressed by a key that is
//! derived from the master seed and a path of integer tags (trial, stage,
//! interval, ...). Results therefore depend only on the key, never on which
//! worker thread happened to run a particle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ParticleRng = ChaCha8Rng;

/// A node in the tree of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

fn mix(mut z: u64) -> u64 {
    // splitmix64 finaliser
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix(seed))
    }

    /// Child key for a sub-computation identified by `tag`.
    pub fn derive(self, tag: u64) -> Self {
        StreamKey(mix(self.0 ^ mix(tag.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    /// Generator for item `index` under this key.
    pub fn rng(self, index: u64) -> ParticleRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}
