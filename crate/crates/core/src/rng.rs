//! Deterministic random streams.
//!
//! Every parallel task draws from its own ChaCha stream selected by
//! `(master_seed, stream)`, so results do not depend on scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::C64;

pub fn stream(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

// Stream ids used by the library. Kept apart so that drawing one quantity
// never shifts another.
pub(crate) const STREAM_CHANNEL: u64 = 1;
pub(crate) const STREAM_CSI: u64 = 2;
pub(crate) const STREAM_OPT_INIT: u64 = 3;
pub(crate) const STREAM_SYMBOLS: u64 = 1 << 32;
