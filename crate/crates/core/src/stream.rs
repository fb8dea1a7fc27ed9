//! Per-trajectory random streams.
//!
//! Stream `i` of a run seeded with `s` is ChaCha8 keyed by
//! `seed_from_u64(s)` with its 64-bit stream id set to `i`. Distinct
//! trajectory indices therefore read disjoint keystreams of the same key,
//! and a trajectory's draws depend only on `(s, i)`, never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TrajectoryRng = ChaCha8Rng;

pub fn derive_stream(base_seed: u64, trajectory_index: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trajectory_index);
    rng
}

/// Wiener increment with mean 0 and variance `dt`.
#[inline]
pub fn gaussian_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> f64 {
    debug_assert!(dt > 0.0);
    let z: f64 = rng.sample(StandardNormal);
    dt.sqrt() * z
}
