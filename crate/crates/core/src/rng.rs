//! Seed expansion. One master seed feeds independent ChaCha streams, one per
//! purpose and per work item, so parallel Monte-Carlo chunks never share state
//! and results do not depend on the worker count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Deployment = 1,
    Shadowing = 2,
    Fading = 3,
    Noise = 4,
    MonteCarlo = 5,
    Sweep = 6,
}

/// Stream for `(purpose, index)` under `seed`. Indices up to 2^48 are distinct.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Gaussian with variance `var`.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    cn01(rng) * var.sqrt()
}

/// Uniform phase on the unit circle.
pub fn unit_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let th: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    Complex64::from_polar(1.0, th)
}
