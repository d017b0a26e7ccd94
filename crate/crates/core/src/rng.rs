//! Deterministic seed derivation.
//!
//! Every replication draws from its own ChaCha stream whose seed is a pure
//! function of `(master, design, theta, replication)`. Results therefore do
//! not depend on how the work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds `value` into `state`; not commutative, so argument order matters.
pub fn mix(state: u64, value: u64) -> u64 {
    splitmix64(state ^ splitmix64(value.wrapping_add(GOLDEN)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed schedule for the (design, mechanism, replication) evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSchedule {
    master: u64,
}

impl SeedSchedule {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn replication(&self, design: usize, theta: usize, rep: usize) -> u64 {
        let s = mix(self.master, design as u64);
        let s = mix(s, theta as u64);
        mix(s, rep as u64)
    }
}

/// Sub-stream of a replication seed, used to separate assignment draws from
/// outcome noise.
pub fn substream(seed: u64, stream: u64) -> u64 {
    mix(seed, stream.wrapping_add(0xA5A5))
}
