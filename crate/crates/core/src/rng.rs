//! Keyed random streams.
//!
//! A stream is a ChaCha8 generator seeded by the run seed, with the ChaCha
//! stream id set to a caller-chosen key (θ index, bootstrap resample, noise
//! sample). Consumers that share a stream between items draw a fixed number
//! of words per item, so positions inside it are a pure function of the
//! item index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Key ranges, so that one seed can drive every consumer independently.
/// Sampling uses the θ index directly.
pub(crate) const STREAM_BOOTSTRAP: u64 = 1 << 48;
pub(crate) const STREAM_NOISE: u64 = 2 << 48;
/// Whole-run draws.
pub(crate) const STREAM_RECAPTURE: u64 = u64::MAX;
pub(crate) const STREAM_PHI_ORACLE: u64 = u64::MAX - 1;

pub(crate) fn stream(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Uniform draw in [0, 1) that always consumes exactly two 32-bit words.
#[inline]
pub(crate) fn unit(rng: &mut ChaCha8Rng) -> f64 {
    use rand::RngCore;
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
