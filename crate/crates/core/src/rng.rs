//! Deterministic seeding.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a
//! [`Seed`]. Child seeds are derived with a SplitMix64 finalizer over the
//! parent value and the child index, so a tree of `(root, index, index, ...)`
//! paths always yields the same stream regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub fn new(root: u64) -> Self {
        Seed(root)
    }

    /// Derives the `index`-th child stream.
    pub fn child(self, index: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0) ^ index.wrapping_mul(GOLDEN)))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(root: u64) -> Self {
        Seed(root)
    }
}
