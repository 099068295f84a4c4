//! Gaussian random fields on periodic grids, sampled spectrally.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::spectral::fft::fft_axis;
use crate::tensor::C64;

/// Spectral scale `sigma (4 pi^2 |k|^2 + tau^2)^(-alpha/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrfSpec {
    pub tau: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl GrfSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Invalid(format!("GRF tau must be positive, got {}", self.tau)));
        }
        if !(self.alpha > d as f64 / 2.0 && self.alpha.is_finite()) {
            return Err(Error::Invalid(format!("GRF alpha must exceed {}, got {}", d as f64 / 2.0, self.alpha)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Invalid(format!("GRF sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn scale(&self, k2: f64) -> f64 {
        self.sigma * (4.0 * PI * PI * k2 + self.tau * self.tau).powf(-self.alpha / 2.0)
    }
}

/// Signed frequency of index `t` on an axis of length `n` (corner layout;
/// the Nyquist index maps to `-n/2`).
pub fn signed_frequency(t: usize, n: usize) -> i64 {
    if t < n.div_ceil(2) {
        t as i64
    } else {
        t as i64 - n as i64
    }
}

fn squared_wavenumbers(sizes: &[usize]) -> Vec<f64> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut k2 = 0.0;
            for &n in sizes.iter().rev() {
                let k = signed_frequency(rem % n, n) as f64;
                rem /= n;
                k2 += k * k;
            }
            k2
        })
        .collect()
}

/// Samples `Re sum_k s_k (a_k + i b_k) exp(2 pi i k.x)` with independent
/// standard normals `a_k, b_k` and the `k = 0` term removed. Taking the real
/// part is the Hermitian symmetrization of the coefficient array. Normals are
/// drawn in row-major order over the full grid, two per wavevector.
pub fn sample_grf(sizes: &[usize], spec: &GrfSpec, rng: &mut SplitMix64) -> Result<Vec<f64>> {
    spec.validate(sizes.len())?;
    if sizes.iter().any(|&n| n < 4) {
        return Err(Error::Invalid(format!("GRF grid {sizes:?} needs at least 4 points per axis")));
    }
    let k2 = squared_wavenumbers(sizes);
    let mut c: Vec<C64> = k2
        .iter()
        .map(|&k2| {
            let a = rng.next_normal();
            let b = rng.next_normal();
            C64::new(a, b) * spec.scale(k2)
        })
        .collect();
    c[0] = C64::new(0.0, 0.0);
    for axis in 0..sizes.len() {
        fft_axis(&mut c, sizes, axis, true);
    }
    Ok(c.into_iter().map(|z| z.re).collect())
}

pub fn sample_grf_2d(n: usize, spec: &GrfSpec, rng: &mut SplitMix64) -> Result<Vec<f64>> {
    sample_grf(&[n, n], spec, rng)
}

pub fn sample_grf_1d(n: usize, spec: &GrfSpec, rng: &mut SplitMix64) -> Result<Vec<f64>> {
    sample_grf(&[n], spec, rng)
}

/// Pointwise variance of [`sample_grf`] fields: `sum_{k != 0} s_k^2`
/// (identical at every grid point).
pub fn grf_point_variance(sizes: &[usize], spec: &GrfSpec) -> f64 {
    squared_wavenumbers(sizes).iter().skip(1).map(|&k2| spec.scale(k2).powi(2)).sum()
}
