//! Projection directions on the unit (n−1)-sphere from the Hammersley set.
//!
//! The set is antipodally symmetric: `H = ⌈K/2⌉` Hammersley points cover the
//! half-sphere `φ ∈ [0, π)` and the remaining `K − H` directions are the
//! negations of the first ones, so every projection direction has an
//! opposite partner whose maxima trace the lower envelope.
//!
//! Point `k` of the `H`-point set in `n−1` dimensions is
//! `(k/H, Φ₂(k), Φ₃(k), Φ₅(k), …)` with `Φ_b` the base-`b` radical inverse.
//! The first coordinate becomes the azimuth `φ = π·k/H`; each remaining
//! coordinate `u_j` becomes a polar angle `θ_j ∈ [0, π]` through the inverse
//! CDF of the density `∝ sin^(n−1−j) θ`, which is the marginal of the uniform
//! measure on the sphere in hyperspherical coordinates. The unit vector is
//!
//! ```text
//! x₁     = cos θ₁
//! x₂     = sin θ₁ cos θ₂
//! …
//! x_{n−1} = sin θ₁ ⋯ sin θ_{n−2} cos φ
//! x_n     = sin θ₁ ⋯ sin θ_{n−2} sin φ
//! ```

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Base-`base` radical inverse: the digits of `index` mirrored about the
/// radix point.
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    value
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// `∫₀^θ sin^m(t) dt`.
fn sin_power_integral(m: usize, theta: f64) -> f64 {
    match m {
        0 => theta,
        1 => 1.0 - theta.cos(),
        _ => {
            let (s, c) = theta.sin_cos();
            -s.powi(m as i32 - 1) * c / m as f64 + (m - 1) as f64 / m as f64 * sin_power_integral(m - 2, theta)
        }
    }
}

/// Angle in [0, π] whose CDF under density `∝ sin^m` equals `u`.
fn inverse_sin_power_cdf(m: usize, u: f64) -> f64 {
    if m == 1 {
        return (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos();
    }
    let total = sin_power_integral(m, PI);
    let target = u * total;
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if sin_power_integral(m, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// K unit vectors in n dimensions, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    vectors: Array2<f64>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dims(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn direction(&self, k: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(k)
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }
}

pub fn hammersley_directions(count: usize, dims: usize) -> Result<DirectionSet> {
    if dims < 2 {
        return Err(Error::arg(format!("directions need at least 2 dimensions, got {dims}")));
    }
    if count == 0 {
        return Err(Error::arg("direction count must be at least 1"));
    }
    let primes = first_primes(dims.saturating_sub(2));
    let half = count.div_ceil(2);
    let mut vectors = Array2::zeros((count, dims));
    for k in 0..half {
        let phi = PI * k as f64 / half as f64;
        let mut v = vectors.row_mut(k);
        let mut sin_product = 1.0;
        for (j, &p) in primes.iter().enumerate() {
            let theta = inverse_sin_power_cdf(dims - 2 - j, radical_inverse(p, k as u64));
            let (s, c) = theta.sin_cos();
            v[j] = sin_product * c;
            sin_product *= s;
        }
        v[dims - 2] = sin_product * phi.cos();
        v[dims - 1] = sin_product * phi.sin();
        let norm = v.dot(&v).sqrt();
        v /= norm;
    }
    for k in half..count {
        let opposite = vectors.row(k - half).mapv(|x| -x);
        vectors.row_mut(k).assign(&opposite);
    }
    Ok(DirectionSet { vectors })
}
