//! Deterministic per-purpose RNG streams.
//!
//! Every random quantity in a game comes from its own ChaCha8 stream keyed by
//! `(seed, tag, index)`, so results do not depend on evaluation order and
//! probing never disturbs the game's own streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type GameRng = ChaCha8Rng;

/// Stream tags.
pub mod tag {
    pub const FEATURE: u64 = 1;
    pub const DRAW: u64 = 2;
    pub const PROBE: u64 = 3;
    pub const ADVERSARY: u64 = 4;
    pub const ARM: u64 = 5;
    pub const ESTIMATE: u64 = 6;
    pub const CHECK: u64 = 7;
    pub const INSTANCE: u64 = 8;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a tag and an index into a stream key.
pub fn derive(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

pub fn stream(seed: u64, tag: u64, index: u64) -> GameRng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, index))
}
