//! Seed derivation.
//!
//! Every random decision in a run draws from its own ChaCha stream keyed by the
//! run seed plus a path of tags (stream kind, cloud round, device round, id).
//! Two runs that ask for the same path get the same stream regardless of the
//! order in which other streams were consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream kinds used as the first tag of a derivation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    SelectLans = 1,
    SelectDevices = 2,
    Train = 3,
    Partition = 4,
    Split = 5,
    Dataset = 6,
    Init = 7,
    World = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a tag path.
pub fn derive_seed(base: u64, stream: Stream, tags: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ splitmix64(stream as u64));
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(base: u64, stream: Stream, tags: &[u64]) -> ChaCha8Rng {
    rng_from(derive_seed(base, stream, tags))
}
