//! Built-in oracle checks: transforms against a naive DFT, gradients
//! against central differences and the Darcy solver against a manufactured
//! solution.

use std::f64::consts::PI;

use crate::data::manufactured_error;
use crate::error::Result;
use crate::models::{Fno, FnoConfig, ForwardOptions, Model, Params};
use crate::rng::SplitMix64;
use crate::spectral::{irfftn_values, rfftn_values, Factorization};
use crate::tensor::{Storage, Tape, Tensor, C64};
use crate::training::relative_lp_loss;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn below(name: &str, value: f64, tolerance: f64) -> CheckResult {
        CheckResult { name: name.into(), value, tolerance, passed: value < tolerance }
    }
}

/// Direct `O(n^2)` multidimensional DFT of a real array (unnormalized,
/// negative exponent), returning the full complex spectrum.
pub fn naive_dft(x: &[f64], sizes: &[usize]) -> Vec<C64> {
    let total: usize = sizes.iter().product();
    let index = |mut flat: usize| -> Vec<usize> {
        let mut idx = vec![0; sizes.len()];
        for a in (0..sizes.len()).rev() {
            idx[a] = flat % sizes[a];
            flat /= sizes[a];
        }
        idx
    };
    (0..total)
        .map(|kf| {
            let k = index(kf);
            let mut acc = C64::new(0.0, 0.0);
            for (jf, &v) in x.iter().enumerate() {
                let j = index(jf);
                let phase: f64 = (0..sizes.len()).map(|a| ((k[a] * j[a]) % sizes[a]) as f64 / sizes[a] as f64).sum();
                acc += C64::from_polar(v, -2.0 * PI * phase);
            }
            acc
        })
        .collect()
}

fn random(n: usize, rng: &mut SplitMix64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_symmetric(1.0)).collect()
}

/// Largest deviation of the real FFT pair from the naive DFT (and of the
/// round trip from the identity) over 1-D sizes `2..=17, 32, 48, 64` and a
/// few 2-D grids.
pub fn check_fft() -> CheckResult {
    let mut rng = SplitMix64::new(11);
    let mut worst: f64 = 0.0;
    let mut grids: Vec<Vec<usize>> = (2..=17).chain([32, 48, 64]).map(|n| vec![n]).collect();
    grids.extend([vec![4, 6], vec![5, 8], vec![12, 9]]);
    for sizes in grids {
        let total: usize = sizes.iter().product();
        let x = random(total, &mut rng);
        let z = rfftn_values(&x, 1, &sizes);
        let full = naive_dft(&x, &sizes);
        let last = *sizes.last().unwrap();
        let h = last / 2 + 1;
        for (i, v) in z.iter().enumerate() {
            let (row, k) = (i / h, i % h);
            worst = worst.max((v - full[row * last + k]).norm());
        }
        let back = irfftn_values(&z, 1, &sizes);
        worst = worst.max(back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    CheckResult::below("fft_vs_naive_dft", worst, 1e-9)
}

/// Central-difference gradient check of `f` at `inputs`. Returns the
/// largest norm-wise relative error over the inputs.
pub fn gradient_check(f: &dyn Fn(&Tape, &[Tensor]) -> Result<Tensor>, inputs: &[Tensor], h: f64) -> Result<f64> {
    let leaves: Vec<Tensor> = inputs.iter().map(|t| t.detach().requires_grad(true)).collect();
    let tape = Tape::new();
    let out = f(&tape, &leaves)?;
    let grads = tape.backward(&out)?;
    let eval = |args: &[Tensor]| -> Result<f64> { f(&Tape::new(), args)?.item() };
    let mut worst: f64 = 0.0;
    for (i, leaf) in leaves.iter().enumerate() {
        let analytic: Vec<f64> = match grads.storage(leaf) {
            Some(Storage::Real(v)) => v.clone(),
            Some(Storage::Complex(v)) => v.iter().flat_map(|z| [z.re, z.im]).collect(),
            None => vec![0.0; leaf.numel() * if leaf.is_complex() { 2 } else { 1 }],
        };
        let mut numeric = Vec::with_capacity(analytic.len());
        for j in 0..analytic.len() {
            let probe = |delta: f64| -> Result<f64> {
                let mut args: Vec<Tensor> = leaves.iter().map(Tensor::detach).collect();
                let data = match leaf.storage() {
                    Storage::Real(v) => {
                        let mut v = v.clone();
                        v[j] += delta;
                        Storage::Real(v)
                    }
                    Storage::Complex(v) => {
                        let mut v = v.clone();
                        if j % 2 == 0 {
                            v[j / 2].re += delta;
                        } else {
                            v[j / 2].im += delta;
                        }
                        Storage::Complex(v)
                    }
                };
                args[i] = Tensor::new(leaf.shape(), data)?;
                eval(&args)
            };
            numeric.push((probe(h)? - probe(-h)?) / (2.0 * h));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    Ok(worst)
}

/// Gradient checks of a tiny end-to-end FNO under the relative L2 loss.
pub fn check_fno_gradients() -> Result<CheckResult> {
    let config = FnoConfig {
        dim: 1,
        in_channels: 1,
        out_channels: 1,
        hidden_channels: 4,
        n_layers: 1,
        modes: vec![2],
        padding_fraction: 0.0,
        factorization: Factorization::Dense,
        positional_embedding: true,
        seed: 5,
    };
    let model = Model::Fno(Fno::new(config)?);
    let mut rng = SplitMix64::new(3);
    let x = Tensor::from_real(&[2, 1, 8], random(16, &mut rng))?;
    let y = Tensor::from_real(&[2, 1, 8], random(16, &mut rng))?;
    let params: Vec<Tensor> = model.params().into_iter().map(|(_, t)| t.detach()).collect();
    let f = |tape: &Tape, ps: &[Tensor]| -> Result<Tensor> {
        let mut m = model.clone();
        for ((_, slot), p) in m.params_mut().into_iter().zip(ps) {
            *slot = p.clone();
        }
        let out = m.forward_grid(tape, &x, &ForwardOptions::default())?;
        relative_lp_loss(tape, &out, &y, 2.0)
    };
    let err = gradient_check(&f, &params, 1e-6)?;
    Ok(CheckResult::below("fno_gradient_vs_central_difference", err, 1e-4))
}

/// Gradient checks of individual differentiable operations.
pub fn check_op_gradients() -> Result<CheckResult> {
    let mut rng = SplitMix64::new(7);
    let a = Tensor::from_real(&[2, 3, 4], random(24, &mut rng))?;
    let b = Tensor::from_real(&[4, 3], random(12, &mut rng))?;
    let w = Tensor::from_real(&[2, 3, 4], random(24, &mut rng))?;
    let cases: Vec<(Vec<Tensor>, Box<dyn Fn(&Tape, &[Tensor]) -> Result<Tensor>>)> = vec![
        (vec![a.clone(), b.clone()], Box::new(|t, v| {
            let c = t.contract(&v[0], &v[1], &[(2, 0)])?;
            t.sum_all(&t.gelu(&c)?)
        })),
        (vec![a.clone(), w.clone()], Box::new(|t, v| {
            let z = t.rfftn(&t.mul(&v[0], &v[1])?, 2)?;
            let re = t.real_part(&t.mul(&z, &t.conj(&z)?)?)?;
            let y = t.irfftn(&t.complex(&re, &t.imag_part(&z)?)?, &[3, 4])?;
            t.sum_all(&t.abs_pow(&y, 3.0)?)
        })),
        (vec![a.clone()], Box::new(|t, v| {
            let p = t.permute(&v[0], &[2, 0, 1])?;
            let s = t.mean(&t.constant_pad(&p, &[(0, 1), (1, 0), (0, 2)], 0.5)?, &[1])?;
            t.sum_all(&t.mul(&s, &s)?)
        })),
    ];
    let mut worst: f64 = 0.0;
    for (inputs, f) in &cases {
        worst = worst.max(gradient_check(f.as_ref(), inputs, 1e-6)?);
    }
    Ok(CheckResult::below("op_gradients_vs_central_difference", worst, 1e-5))
}

/// Second-order convergence of the Darcy solver: error ratios between
/// `n = 16, 32, 64` must lie in `[3.2, 4.8]`. Reports the worst distance
/// of a ratio from the band (zero when inside).
pub fn check_darcy() -> Result<Vec<CheckResult>> {
    let e: Vec<f64> = [16, 32, 64].iter().map(|&n| manufactured_error(n)).collect::<Result<_>>()?;
    Ok(e.windows(2)
        .zip(["darcy_ratio_16_32", "darcy_ratio_32_64"])
        .map(|(w, name)| {
            let r = w[0] / w[1];
            CheckResult { name: name.into(), value: r, tolerance: 4.8, passed: (3.2..=4.8).contains(&r) }
        })
        .collect())
}

/// Every built-in check, in a fixed order.
pub fn run_selftest() -> Result<Vec<CheckResult>> {
    let mut out = vec![check_fft(), check_op_gradients()?, check_fno_gradients()?];
    out.extend(check_darcy()?);
    Ok(out)
}

