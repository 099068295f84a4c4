//! Real n-dimensional FFTs over the trailing axes of a tensor.
//!
//! Convention: the forward transform is unnormalized, the inverse carries
//! `1/N` with `N` the product of the spatial sizes. The last spatial axis
//! stores the non-redundant half `n/2 + 1` of the Hermitian spectrum.

use super::fft::{fft_axis, plan};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{Storage, Tape, Tensor, C64};

pub fn half_len(n: usize) -> usize {
    n / 2 + 1
}

/// Spectrum block shape `[n1, .., n_{d-1}, n_d/2 + 1]` for spatial sizes.
pub fn spectrum_dims(sizes: &[usize]) -> Vec<usize> {
    let mut s = sizes.to_vec();
    if let Some(last) = s.last_mut() {
        *last = half_len(*last);
    }
    s
}

/// True when index `k` on the half axis of a length-`n` signal is its own
/// conjugate partner (DC, or Nyquist for even `n`).
pub fn self_conjugate(k: usize, n: usize) -> bool {
    k == 0 || (n.is_multiple_of(2) && k == n / 2)
}

/// Real FFT along the last axis. Lines are transformed in pairs packed as
/// `x + i y` into one complex FFT and separated by Hermitian symmetry.
fn rfft_last(x: &[f64], n: usize) -> Vec<C64> {
    let h = half_len(n);
    let lines = x.len() / n;
    let p = plan(n);
    let mut out = vec![C64::new(0.0, 0.0); lines * h];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let mut res = vec![C64::new(0.0, 0.0); n];
    let mut l = 0;
    while l < lines {
        let a = &x[l * n..(l + 1) * n];
        if l + 1 < lines {
            let b = &x[(l + 1) * n..(l + 2) * n];
            for k in 0..n {
                buf[k] = C64::new(a[k], b[k]);
            }
            p.transform(&buf, &mut res, false);
            for k in 0..h {
                let z = res[k];
                let zm = res[(n - k) % n].conj();
                out[l * h + k] = (z + zm) * 0.5;
                let d = (z - zm) * 0.5;
                out[(l + 1) * h + k] = C64::new(d.im, -d.re);
            }
            l += 2;
        } else {
            for k in 0..n {
                buf[k] = C64::new(a[k], 0.0);
            }
            p.transform(&buf, &mut res, false);
            out[l * h..(l + 1) * h].copy_from_slice(&res[..h]);
            l += 1;
        }
    }
    out
}

fn hermitian_full(line: &[C64], n: usize, full: &mut [C64]) {
    for (k, &v) in line.iter().enumerate() {
        if self_conjugate(k, n) {
            full[k] = C64::new(v.re, 0.0);
        } else {
            full[k] = v;
            full[n - k] = v.conj();
        }
    }
}

/// Hermitian synthesis along the last axis: real parts of DC and Nyquist are
/// used, interior bins contribute with their conjugate mirror. Unnormalized.
/// Pairs of lines share one complex transform as `X + i Y`.
fn irfft_last(z: &[C64], n: usize) -> Vec<f64> {
    let h = half_len(n);
    let lines = z.len() / h;
    let p = plan(n);
    let mut out = vec![0.0; lines * n];
    let mut fa = vec![C64::new(0.0, 0.0); n];
    let mut fb = vec![C64::new(0.0, 0.0); n];
    let mut res = vec![C64::new(0.0, 0.0); n];
    let mut l = 0;
    while l < lines {
        hermitian_full(&z[l * h..(l + 1) * h], n, &mut fa);
        if l + 1 < lines {
            hermitian_full(&z[(l + 1) * h..(l + 2) * h], n, &mut fb);
            for k in 0..n {
                fa[k] += C64::new(-fb[k].im, fb[k].re);
            }
            p.transform(&fa, &mut res, true);
            for k in 0..n {
                out[l * n + k] = res[k].re;
                out[(l + 1) * n + k] = res[k].im;
            }
            l += 2;
        } else {
            p.transform(&fa, &mut res, true);
            for k in 0..n {
                out[l * n + k] = res[k].re;
            }
            l += 1;
        }
    }
    out
}

fn fft_leading(z: &mut [C64], block: &[usize], blocks: usize, inverse: bool) {
    let len: usize = block.iter().product();
    for b in 0..blocks {
        let part = &mut z[b * len..(b + 1) * len];
        for axis in 0..block.len() - 1 {
            fft_axis(part, block, axis, inverse);
        }
    }
}

/// Forward real FFT over the trailing `sizes.len()` axes of `blocks`
/// contiguous real blocks.
pub fn rfftn_values(x: &[f64], blocks: usize, sizes: &[usize]) -> Vec<C64> {
    let mut z = rfft_last(x, *sizes.last().expect("at least one spatial axis"));
    fft_leading(&mut z, &spectrum_dims(sizes), blocks, false);
    z
}

/// Inverse of [`rfftn_values`], normalized by `1/N`.
pub fn irfftn_values(z: &[C64], blocks: usize, sizes: &[usize]) -> Vec<f64> {
    let mut w = z.to_vec();
    fft_leading(&mut w, &spectrum_dims(sizes), blocks, true);
    let total: usize = sizes.iter().product();
    let mut y = irfft_last(&w, *sizes.last().expect("at least one spatial axis"));
    let s = 1.0 / total as f64;
    y.iter_mut().for_each(|v| *v *= s);
    y
}

/// Multiplies each bin by `f(k, n)` where `k` is its index on the half axis.
fn weight_half_axis(z: &mut [C64], n: usize, f: impl Fn(usize) -> f64) {
    let h = half_len(n);
    for (i, v) in z.iter_mut().enumerate() {
        *v *= f(i % h);
    }
}

fn split_spatial(shape: &[usize], d: usize) -> Result<(usize, Vec<usize>)> {
    if d == 0 || d > shape.len() {
        return Err(shape_err!("cannot take {d} spatial axes of shape {shape:?}"));
    }
    let lead = shape[..shape.len() - d].iter().product();
    Ok((lead, shape[shape.len() - d..].to_vec()))
}

impl Tape {
    /// Real FFT over the trailing `d` axes of a real tensor.
    pub fn rfftn(&self, x: &Tensor, d: usize) -> Result<Tensor> {
        let v = x.real_values().map_err(|_| Error::Kind("rfftn expects a real tensor".into()))?;
        let (blocks, sizes) = split_spatial(x.shape(), d)?;
        let z = rfftn_values(v, blocks, &sizes);
        let mut out_shape = x.shape().to_vec();
        let r = out_shape.len();
        out_shape[r - 1] = half_len(sizes[d - 1]);
        let total: usize = sizes.iter().product();
        self.record(&[x], out_shape, Storage::Complex(z), move |g, _| {
            // adjoint of the half-spectrum map: interior bins count once for
            // themselves and once for their mirror
            let n = sizes[d - 1];
            let mut w = g.complex().to_vec();
            weight_half_axis(&mut w, n, |k| if self_conjugate(k, n) { 1.0 } else { 0.5 });
            let mut gx = irfftn_values(&w, blocks, &sizes);
            gx.iter_mut().for_each(|v| *v *= total as f64);
            vec![Some(Storage::Real(gx))]
        })
    }

    /// Inverse real FFT producing spatial sizes `sizes` on the trailing axes.
    pub fn irfftn(&self, z: &Tensor, sizes: &[usize]) -> Result<Tensor> {
        let v = z.complex_values().map_err(|_| Error::Kind("irfftn expects a complex tensor".into()))?;
        let d = sizes.len();
        let (blocks, dims) = split_spatial(z.shape(), d)?;
        if dims != spectrum_dims(sizes) {
            return Err(shape_err!(
                "spectrum axes {dims:?} do not match spatial sizes {sizes:?} (expected {:?})",
                spectrum_dims(sizes)
            ));
        }
        let y = irfftn_values(v, blocks, sizes);
        let mut out_shape = z.shape().to_vec();
        let r = out_shape.len();
        out_shape[r - 1] = sizes[d - 1];
        let sizes = sizes.to_vec();
        let total: usize = sizes.iter().product();
        self.record(&[z], out_shape, Storage::Real(y), move |g, _| {
            let n = sizes[d - 1];
            let mut w = rfft_last(g.real(), n);
            let h = half_len(n);
            for (i, v) in w.iter_mut().enumerate() {
                let k = i % h;
                if self_conjugate(k, n) {
                    v.im = 0.0;
                } else {
                    *v *= 2.0;
                }
            }
            fft_leading(&mut w, &spectrum_dims(&sizes), blocks, false);
            let s = 1.0 / total as f64;
            w.iter_mut().for_each(|v| *v *= s);
            vec![Some(Storage::Complex(w))]
        })
    }
}
