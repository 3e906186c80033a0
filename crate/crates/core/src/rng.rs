//! Per-iteration random streams.
//!
//! Every random draw in a Monte Carlo iteration comes from a ChaCha stream
//! seeded by `derive_seed(master_seed, iteration, tag)`. Streams are keyed by
//! tag, so adding a consumer never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags. Values are arbitrary but frozen: changing one changes every
/// generated instance.
pub mod stream {
    pub const USER_POSITIONS: u64 = 0x5553_4552_504f_5331;
    pub const LOCAL_CAPACITY: u64 = 0x434c_4f43_414c_4341;
    pub const EDGE_CAPACITY: u64 = 0x4345_5343_4150_4143;
    pub const CHANNEL: u64 = 0x4348_414e_4e45_4c46;
    pub const UNCERTAINTY: u64 = 0x554e_4345_5254_4149;
    pub const RANDOM_K: u64 = 0x5241_4e44_4f4d_4b4b;
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(master_seed: u64, iteration: u64, tag: u64) -> u64 {
    let x = mix64(master_seed.wrapping_add(GOLDEN_GAMMA))
        ^ mix64(iteration.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1))
        ^ mix64(tag.rotate_left(17));
    mix64(x)
}

pub fn stream_rng(master_seed: u64, iteration: u64, tag: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master_seed, iteration, tag))
}
