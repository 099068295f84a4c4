//! Relative function-space losses, computed per sample before batch
//! reduction.

use std::f64::consts::PI;

use crate::data::signed_frequency;
use crate::error::{shape_err, Error, Result};
use crate::spectral::{self_conjugate, spectrum_dims};
use crate::tensor::{Storage, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// `||pred - target||_p / ||target||_p` with discrete `p`-norms.
    RelativeLp(f64),
    /// Relative Sobolev `H^1` norm with spectral derivatives.
    H1,
}

impl LossSpec {
    /// Parses `l2`, `lp:<p>` or `h1`.
    pub fn parse(s: &str) -> Result<LossSpec> {
        let spec = match s {
            "l2" => LossSpec::RelativeLp(2.0),
            "h1" => LossSpec::H1,
            _ => match s.strip_prefix("lp:").map(str::parse::<f64>) {
                Some(Ok(p)) => LossSpec::RelativeLp(p),
                _ => return Err(Error::Config(format!("unknown loss {s:?} (expected l2, lp:<p> or h1)"))),
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::RelativeLp(p) if !(p >= 1.0 && p.is_finite()) => {
                Err(Error::Config(format!("loss exponent must be >= 1, got {p}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            LossSpec::RelativeLp(2.0) => "l2".into(),
            LossSpec::RelativeLp(p) => format!("lp:{p}"),
            LossSpec::H1 => "h1".into(),
        }
    }

    /// Per-sample losses `[B]` for `[B, C, n..]` inputs with `d` spatial axes.
    pub fn per_sample(&self, tape: &Tape, pred: &Tensor, target: &Tensor, d: usize) -> Result<Tensor> {
        match *self {
            LossSpec::RelativeLp(p) => relative_lp_per_sample(tape, pred, target, p),
            LossSpec::H1 => h1_per_sample(tape, pred, target, d),
        }
    }

    /// Batch mean of [`LossSpec::per_sample`].
    pub fn loss(&self, tape: &Tape, pred: &Tensor, target: &Tensor, d: usize) -> Result<Tensor> {
        let per = self.per_sample(tape, pred, target, d)?;
        tape.mean_all(&per)
    }
}

fn check_pair(pred: &Tensor, target: &Tensor) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(shape_err!("prediction {:?} and target {:?} differ in shape", pred.shape(), target.shape()));
    }
    if pred.rank() < 2 {
        return Err(shape_err!("losses expect batched data [B, ..], got {:?}", pred.shape()));
    }
    pred.real_values()?;
    target.real_values()?;
    Ok(())
}

fn sum_per_sample(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let axes: Vec<usize> = (1..x.rank()).collect();
    tape.sum(x, &axes)
}

impl Tape {
    /// `(num / den)^(1/p)` elementwise. The gradient with respect to `num`
    /// is taken as zero where `num = 0`; `den` must be positive.
    pub fn root_ratio(&self, num: &Tensor, den: &Tensor, p: f64) -> Result<Tensor> {
        if num.shape() != den.shape() {
            return Err(shape_err!("root_ratio operands {:?} and {:?} differ", num.shape(), den.shape()));
        }
        let nv = num.real_values()?;
        let dv = den.real_values()?;
        if let Some(i) = dv.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Invalid(format!("target of sample {i} has zero norm")));
        }
        let r: Vec<f64> = nv.iter().zip(dv).map(|(&a, &b)| (a / b).powf(1.0 / p)).collect();
        let (nc, dc, rc) = (num.clone(), den.clone(), r.clone());
        self.record(&[num, den], num.shape().to_vec(), Storage::Real(r), move |g, needs| {
            let g = g.real();
            let nv = nc.storage().real();
            let dv = dc.storage().real();
            let gn = needs[0].then(|| {
                Storage::Real(
                    (0..g.len()).map(|i| if nv[i] == 0.0 { 0.0 } else { g[i] * rc[i] / (p * nv[i]) }).collect(),
                )
            });
            let gd = needs[1].then(|| Storage::Real((0..g.len()).map(|i| -g[i] * rc[i] / (p * dv[i])).collect()));
            vec![gn, gd]
        })
    }
}

/// Per-sample relative `L^p` errors `[B]`.
pub fn relative_lp_per_sample(tape: &Tape, pred: &Tensor, target: &Tensor, p: f64) -> Result<Tensor> {
    check_pair(pred, target)?;
    LossSpec::RelativeLp(p).validate()?;
    let diff = tape.sub(pred, target)?;
    let num = sum_per_sample(tape, &tape.abs_pow(&diff, p)?)?;
    let den = sum_per_sample(tape, &tape.abs_pow(target, p)?)?;
    tape.root_ratio(&num, &den, p)
}

/// Batch-mean relative `L^p` loss.
pub fn relative_lp_loss(tape: &Tape, pred: &Tensor, target: &Tensor, p: f64) -> Result<Tensor> {
    tape.mean_all(&relative_lp_per_sample(tape, pred, target, p)?)
}

/// Half-spectrum weights `(1 + 4 pi^2 |k|^2) c_k / N^2`, where `c_k` counts
/// the Hermitian partner of bins that are not self-conjugate.
pub fn h1_weights(sizes: &[usize]) -> Vec<f64> {
    let dims = spectrum_dims(sizes);
    let d = sizes.len();
    let total: usize = dims.iter().product();
    let big_n = sizes.iter().product::<usize>() as f64;
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut k2 = 0.0;
            let mut last = 0;
            for a in (0..d).rev() {
                let i = rem % dims[a];
                rem /= dims[a];
                let k = if a + 1 == d {
                    last = i;
                    i as f64
                } else {
                    signed_frequency(i, sizes[a]) as f64
                };
                k2 += k * k;
            }
            let c = if self_conjugate(last, sizes[d - 1]) { 1.0 } else { 2.0 };
            (1.0 + 4.0 * PI * PI * k2) * c / (big_n * big_n)
        })
        .collect()
}

fn h1_norm_sq(tape: &Tape, x: &Tensor, d: usize) -> Result<Tensor> {
    let sizes = x.shape()[x.rank() - d..].to_vec();
    let z = tape.rfftn(x, d)?;
    let re = tape.real_part(&z)?;
    let im = tape.imag_part(&z)?;
    let power = tape.add(&tape.mul(&re, &re)?, &tape.mul(&im, &im)?)?;
    let mut wshape = vec![1; x.rank() - d];
    wshape.extend(spectrum_dims(&sizes));
    let w = Tensor::from_real(&wshape, h1_weights(&sizes))?;
    sum_per_sample(tape, &tape.mul(&power, &w)?)
}

/// Per-sample relative `H^1` errors `[B]` on periodic grids.
pub fn h1_per_sample(tape: &Tape, pred: &Tensor, target: &Tensor, d: usize) -> Result<Tensor> {
    check_pair(pred, target)?;
    if d == 0 || d + 1 > pred.rank() {
        return Err(shape_err!("cannot take {d} spatial axes of shape {:?}", pred.shape()));
    }
    let diff = tape.sub(pred, target)?;
    let num = h1_norm_sq(tape, &diff, d)?;
    let den = h1_norm_sq(tape, target, d)?;
    tape.root_ratio(&num, &den, 2.0)
}

pub fn h1_loss(tape: &Tape, pred: &Tensor, target: &Tensor, d: usize) -> Result<Tensor> {
    tape.mean_all(&h1_per_sample(tape, pred, target, d)?)
}
