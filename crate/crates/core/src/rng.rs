//! Seeded random streams.
//!
//! Every random draw in the crate comes from an [`RngStream`]: a ChaCha12
//! generator keyed by a master seed and a 64-bit stream id. Stream ids are
//! derived from `(phase, a, b)` with a splitmix64 chain, so a given column,
//! pair, chunk or replicate always sees the same draws no matter how many
//! other streams exist or in which order workers run.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// The pipeline stage a stream belongs to. The discriminant is part of the
/// stream key and must never be renumbered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Phase {
    Gsc = 1,
    Calibration = 2,
    Latent = 3,
    Expand = 4,
    Replicate = 5,
    Bootstrap = 6,
    Plan = 7,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for `(phase, a, b)`.
pub fn stream_id(phase: Phase, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(phase as u64) ^ a) ^ b)
}

/// Derive a child seed, used where a whole sub-pipeline (e.g. one
/// replicate) needs its own master seed.
pub fn derive_seed(seed: u64, phase: Phase, index: u64) -> u64 {
    splitmix64(seed ^ stream_id(phase, index, 0))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::keyed(seed, 0)
    }

    pub fn keyed(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream { inner }
    }

    pub fn derive(seed: u64, phase: Phase, a: u64, b: u64) -> Self {
        Self::keyed(seed, stream_id(phase, a, b))
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
