//! Seeded random streams. Every sampler derives its own stream from the
//! user seed and a purpose tag, so adding a sampler never perturbs another.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// A stream for `(seed, tag)`; tags are arbitrary fixed constants.
pub fn stream(seed: u64, tag: u64) -> Stream {
    let mut s = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    s.set_stream(tag);
    s
}

pub fn uniform_in_box(rng: &mut Stream, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| if b > a { rng.gen_range(a..b) } else { a })
        .collect()
}

/// Uniform point in the closed unit ball of dimension `n`.
pub fn uniform_in_ball(rng: &mut Stream, n: usize) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return p;
        }
    }
}

/// Uniform point on the unit sphere of dimension `n` (rejection from the ball).
pub fn uniform_on_sphere(rng: &mut Stream, n: usize) -> Vec<f64> {
    loop {
        let p = uniform_in_ball(rng, n);
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 1e-3 {
            return p.iter().map(|v| v / r).collect();
        }
    }
}
