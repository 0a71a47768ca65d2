//! Seed derivation and stream-per-sample RNG construction.
//!
//! Every stochastic component draws from a ChaCha stream whose seed is a
//! hash of (base seed, purpose tag, item index). Work split across threads
//! therefore produces the same bits as a sequential run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keeping independent consumers of one base seed apart.
pub mod tag {
    pub const WEIGHT_INIT: u64 = 0x01;
    pub const DATASET: u64 = 0x02;
    pub const CORRUPTION: u64 = 0x03;
    pub const ATTACK: u64 = 0x04;
    pub const TRAIN_SHUFFLE: u64 = 0x05;
    pub const TRAIN_MIXUP: u64 = 0x06;
    pub const TRAIN_ADV: u64 = 0x07;
    pub const TRAIN_AUGMENT: u64 = 0x08;
    pub const GRAD_FALLBACK: u64 = 0x09;
}

/// SplitMix64 finalizer; maps any 64-bit value to a well-mixed one.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent seed from (base, tag, index).
pub fn derive(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(tag)) ^ splitmix64(index))
}

/// RNG for the given (base, tag, index) stream.
pub fn stream(base: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tag, index))
}
