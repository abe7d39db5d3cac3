//! Deterministic random and quasi-random sampling.
//!
//! Every sample loop draws from its own ChaCha stream keyed by
//! `(seed, stream)`, so results do not depend on thread scheduling or on how
//! many samples came before.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::group::{HPoint, HorizontalVector};

pub type SampleRng = ChaCha8Rng;

/// Independent generator for sample number `stream` under `seed`.
pub fn rng_for(seed: u64, stream: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniformly distributed unit vector of R²ⁿ.
pub fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> HorizontalVector {
    loop {
        let mut v = HorizontalVector::zeros(n);
        for k in 0..2 * n {
            v.set(k, rng.sample(StandardNormal));
        }
        if let Some(u) = v.normalized() {
            return u;
        }
    }
}

/// Uniform sample of the coordinate box `|x_i|, |y_i| ≤ r`, `|t| ≤ r²`
/// restricted to the gauge ball `N(ξ) < r` (rejection sampling).
pub fn gauge_ball_point<R: Rng>(rng: &mut R, n: usize, r: f64) -> HPoint {
    loop {
        let mut p = HPoint::identity(n);
        for i in 0..n {
            p.x[i] = rng.gen_range(-r..r);
            p.y[i] = rng.gen_range(-r..r);
        }
        p.t = rng.gen_range(-r * r..r * r);
        if p.gauge() < r {
            return p;
        }
    }
}

/// Log-uniform sample of `[lo, hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Low-discrepancy point of `[0, 1)^dim` (Halton, index offset by one so the
/// origin is skipped). Dimensions beyond the prime table reuse it with a shift.
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            let v = halton(index + 1, PRIMES[k % PRIMES.len()]);
            (v + 0.5 * (k / PRIMES.len()) as f64).fract()
        })
        .collect()
}

/// Quasi-uniform direction set on the unit sphere of R²ⁿ.
///
/// For `n = 1` this is the uniform angular grid `θ_k = 2πk / count`; for
/// `n > 1` Halton points are pushed to Gaussians by Box–Muller and normalized.
pub fn sphere_directions(n: usize, count: usize) -> Vec<HorizontalVector> {
    if n == 1 {
        return (0..count)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / count as f64;
                HorizontalVector::h1(th.cos(), th.sin())
            })
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    let mut idx = 0u64;
    while out.len() < count {
        let u = halton_point(idx, 2 * n);
        idx += 1;
        let mut v = HorizontalVector::zeros(n);
        for k in 0..n {
            let (u1, u2) = (u[2 * k].max(1e-300), u[2 * k + 1]);
            let rad = (-2.0 * u1.ln()).sqrt();
            v.set(2 * k, rad * (2.0 * PI * u2).cos());
            v.set(2 * k + 1, rad * (2.0 * PI * u2).sin());
        }
        if let Some(d) = v.normalized() {
            out.push(d);
        }
    }
    out
}

/// Direction at angle `θ` in the plane spanned by orthonormal `e1`, `e2`.
pub fn rotate_in_plane(e1: &HorizontalVector, e2: &HorizontalVector, theta: f64) -> HorizontalVector {
    e1.scale(theta.cos()).axpy(theta.sin(), e2)
}
