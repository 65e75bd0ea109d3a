//! Counter-based random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by
//! `(seed, index, purpose, sub)`, so draws made for one purpose never shift
//! the draws made for another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    PoseNoise = 1,
    SegmentationNoise = 2,
    TrackFilter = 3,
    TrackSpawn = 4,
}

/// Deterministic stream for `(seed, index, purpose, sub)`.
///
/// `index` is typically the frame number and `sub` a track id; only the low
/// 24 bits of `sub` and 32 bits of `index` take part.
pub fn stream(seed: u64, index: u64, purpose: Purpose, sub: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((index & 0xFFFF_FFFF) << 32) | ((purpose as u64) << 24) | (sub as u64 & 0xFF_FFFF);
    rng.set_stream(id);
    rng
}
