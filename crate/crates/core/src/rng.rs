//! Seeded random streams. Every suite draws from its own ChaCha stream selected by
//! a label, so adding draws in one suite never shifts the samples of another.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stream for `label` under the run seed.
pub fn stream(seed: u64, label: &str) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}

/// Uniform vector with entries in `[-scale, scale]`.
pub fn uniform_vec(rng: &mut Stream, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..=scale))
}

/// Uniform vector inside the box `[lo_i, hi_i]`, shrunk by `margin` on each side.
pub fn box_point(rng: &mut Stream, lo: &[f64], hi: &[f64], margin: f64) -> DVector<f64> {
    DVector::from_fn(lo.len(), |i, _| {
        let w = hi[i] - lo[i];
        rng.random_range(lo[i] + margin * w..=hi[i] - margin * w)
    })
}
