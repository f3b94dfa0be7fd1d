//! Deterministic random streams.
//!
//! Every stochastic operation takes an explicit [`RngSeed`]. Independent units
//! of work (subjects, folds, augmented trials, permutations) get their own
//! stream via [`RngSeed::derive`], so results do not depend on execution order
//! or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed(seed)
    }

    /// Child seed for a labelled sub-stream. Distinct paths give unrelated seeds.
    pub fn derive(self, path: &[u64]) -> RngSeed {
        let mut h = splitmix64(self.0 ^ 0x6e65_7572_6f62_6f6f);
        for &p in path {
            h = splitmix64(h ^ splitmix64(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        RngSeed(h)
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn derive_rng(self, path: &[u64]) -> Rng {
        self.derive(path).rng()
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

/// Stream tags so that call sites do not collide by accident.
pub(crate) mod stream {
    pub const SUBJECT: u64 = 1;
    pub const PATTERNS: u64 = 2;
    pub const FOLDS: u64 = 3;
    pub const AUGMENT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const SUBSAMPLE: u64 = 6;
    pub const PERMUTATION: u64 = 7;
    pub const TRAIN_SPLIT: u64 = 8;
    pub const TEST_SPLIT: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
