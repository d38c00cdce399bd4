//! Keyed random streams.
//!
//! Every source of randomness in a run is derived from the run seed plus a
//! small tuple of tags (purpose, round, arm, ...), so streams never share
//! state and a policy's choices cannot shift the environment's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub(crate) mod tag {
    pub const ENV_HIDDEN: u64 = 1;
    pub const ENV_ROUND: u64 = 2;
    pub const ENV_NOISE: u64 = 3;
    pub const ENV_EPOCH: u64 = 4;
    pub const NET_F1: u64 = 10;
    pub const NET_F2: u64 = 11;
    pub const PROJECTOR: u64 = 12;
    pub const POLICY: u64 = 20;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with an ordered list of tags into a single 64-bit key.
pub fn mix_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// A deterministic generator for `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, tags))
}
