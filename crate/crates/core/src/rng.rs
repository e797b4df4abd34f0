//! Seed derivation for reproducible, schedule-independent random streams.
//!
//! Every random choice in the crate is driven by a [`ChaCha8Rng`] seeded from
//! a master seed and a stream identifier, so parallel work can be split by
//! stream without sharing generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a numeric stream id.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Stream id for a named sub-stream (FNV-1a over the name).
pub fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xCBF2_9CE4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3)
    })
}

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for slice `index` of an ensemble built from `master`.
pub fn slice_rng(master: u64, index: usize) -> StreamRng {
    seeded(derive_seed(master, index as u64))
}

/// Generator for a named sub-stream of `master`.
pub fn named_rng(master: u64, name: &str) -> StreamRng {
    seeded(derive_seed(master, stream_id(name)))
}
