//! Deterministic seed splitting.
//!
//! One master seed fans out into independent ChaCha8 streams, one per
//! consumer. Changing how many coins a strategy flips never moves the item
//! or price sequence of a run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named consumers of randomness within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Items,
    Prices,
    Strategy,
    Oracle,
    Separators,
    Replicate,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Items => 0x6974_656d,
            Stream::Prices => 0x7072_6963,
            Stream::Strategy => 0x7374_7261,
            Stream::Oracle => 0x6f72_6163,
            Stream::Separators => 0x7365_7061,
            Stream::Replicate => 0x7265_706c,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and an arbitrary integer key.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    mix64(mix64(seed) ^ key.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn stream_seed(master: u64, stream: Stream) -> u64 {
    derive_seed(master, stream.tag())
}

pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, stream))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
