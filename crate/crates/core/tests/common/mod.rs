//! Oracles shared by the integration tests. Nothing here calls into the
//! library's own transforms or gradient checker.

#![allow(dead_code)]

use std::f64::consts::PI;

use opnet::rng::SplitMix64;
use opnet::{Storage, Tape, Tensor, C64};

pub fn random_vec(n: usize, rng: &mut SplitMix64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_symmetric(1.0)).collect()
}

pub fn random_real(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    Tensor::from_real(shape, random_vec(shape.iter().product(), &mut rng)).unwrap()
}

pub fn random_complex(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    let n = shape.iter().product();
    Tensor::from_complex(shape, (0..n).map(|_| C64::new(rng.uniform_symmetric(1.0), rng.uniform_symmetric(1.0))).collect())
        .unwrap()
}

/// Scalarizes any tensor as `sum(w * t)` (real part for complex tensors)
/// with fixed pseudo-random weights, so every output entry matters.
pub fn probe(tape: &Tape, t: &Tensor) -> opnet::Result<Tensor> {
    if t.is_complex() {
        let w = random_complex(t.shape(), 999);
        tape.sum_all(&tape.real_part(&tape.mul(t, &w)?)?)
    } else {
        let w = random_real(t.shape(), 998);
        tape.sum_all(&tape.mul(t, &w)?)
    }
}

fn flat(s: &Storage) -> Vec<f64> {
    match s {
        Storage::Real(v) => v.clone(),
        Storage::Complex(v) => v.iter().flat_map(|z| [z.re, z.im]).collect(),
    }
}

fn perturbed(t: &Tensor, j: usize, delta: f64) -> Tensor {
    let data = match t.storage() {
        Storage::Real(v) => {
            let mut v = v.clone();
            v[j] += delta;
            Storage::Real(v)
        }
        Storage::Complex(v) => {
            let mut v = v.clone();
            if j.is_multiple_of(2) {
                v[j / 2].re += delta;
            } else {
                v[j / 2].im += delta;
            }
            Storage::Complex(v)
        }
    };
    Tensor::new(t.shape(), data).unwrap()
}

pub type ScalarFn<'a> = dyn Fn(&Tape, &[Tensor]) -> opnet::Result<Tensor> + 'a;

/// Largest norm-wise relative error between the tape gradient of `f` and
/// central differences with step `h`, over all inputs. Complex entries are
/// perturbed in their real and imaginary parts separately.
pub fn central_difference_error(f: &ScalarFn, inputs: &[Tensor], h: f64) -> f64 {
    let leaves: Vec<Tensor> = inputs.iter().map(|t| t.detach().requires_grad(true)).collect();
    let tape = Tape::new();
    let out = f(&tape, &leaves).unwrap();
    let grads = tape.backward(&out).unwrap();
    let plain: Vec<Tensor> = leaves.iter().map(Tensor::detach).collect();
    let value = |args: &[Tensor]| f(&Tape::new(), args).unwrap().item().unwrap();
    let mut worst: f64 = 0.0;
    for (i, leaf) in plain.iter().enumerate() {
        let n = flat(leaf.storage()).len();
        let analytic = grads.storage(&leaves[i]).map(flat).unwrap_or_else(|| vec![0.0; n]);
        let mut numeric = Vec::with_capacity(n);
        for j in 0..n {
            let mut args = plain.clone();
            args[i] = perturbed(leaf, j, h);
            let up = value(&args);
            args[i] = perturbed(leaf, j, -h);
            let down = value(&args);
            numeric.push((up - down) / (2.0 * h));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&analytic).max(norm(&numeric));
        if scale > 0.0 {
            worst = worst.max(norm(&diff) / scale);
        }
    }
    worst
}

/// Row-major multi-index of a flat offset.
pub fn unravel(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; sizes.len()];
    for a in (0..sizes.len()).rev() {
        idx[a] = flat % sizes[a];
        flat /= sizes[a];
    }
    idx
}

/// `exp(sign * 2 pi i <k, j / n>)` on a multi-dimensional grid.
pub fn twiddle(k: &[usize], j: &[usize], sizes: &[usize], sign: f64) -> C64 {
    let phase: f64 = (0..sizes.len()).map(|a| ((k[a] * j[a]) % sizes[a]) as f64 / sizes[a] as f64).sum();
    C64::from_polar(1.0, sign * 2.0 * PI * phase)
}

/// Direct `O(N^2)` forward DFT (negative exponent, unnormalized).
pub fn naive_dft(x: &[f64], sizes: &[usize]) -> Vec<C64> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|kf| {
            let k = unravel(kf, sizes);
            x.iter().enumerate().map(|(jf, &v)| twiddle(&k, &unravel(jf, sizes), sizes, -1.0) * v).sum()
        })
        .collect()
}

/// Direct inverse DFT (positive exponent, `1/N`).
pub fn naive_idft(z: &[C64], sizes: &[usize]) -> Vec<C64> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|jf| {
            let j = unravel(jf, sizes);
            let s: C64 = z.iter().enumerate().map(|(kf, &v)| twiddle(&unravel(kf, sizes), &j, sizes, 1.0) * v).sum();
            s / total as f64
        })
        .collect()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
