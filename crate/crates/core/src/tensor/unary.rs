use super::{Storage, Tape, Tensor};
use crate::error::{invalid, Error, Result};

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh())
}

pub fn gelu_derivative(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

fn real_input<'a>(x: &'a Tensor, op: &str) -> Result<&'a [f64]> {
    x.real_values().map_err(|_| Error::Kind(format!("{op} is only defined for real tensors")))
}

impl Tape {
    /// Pointwise map with derivative `d`, both evaluated on the input.
    fn pointwise(&self, x: &Tensor, f: impl Fn(f64) -> f64, d: impl Fn(f64) -> f64 + 'static) -> Result<Tensor> {
        let v = x.real_values()?;
        let data = Storage::Real(v.iter().map(|&e| f(e)).collect());
        if !self.tracking(&[x]) {
            return Ok(Tensor::from_parts(x.shape().to_vec(), data));
        }
        let xc = x.clone();
        self.record(&[x], x.shape().to_vec(), data, move |g, _| {
            let g = g.real();
            let xv = xc.storage().real();
            vec![Some(Storage::Real(g.iter().zip(xv).map(|(&gi, &xi)| gi * d(xi)).collect()))]
        })
    }

    pub fn gelu(&self, x: &Tensor) -> Result<Tensor> {
        real_input(x, "gelu")?;
        self.pointwise(x, gelu_scalar, gelu_derivative)
    }

    pub fn relu(&self, x: &Tensor) -> Result<Tensor> {
        real_input(x, "relu")?;
        self.pointwise(x, |v| v.max(0.0), |v| if v > 0.0 { 1.0 } else { 0.0 })
    }

    /// `|x|^p` for `p >= 1`.
    pub fn abs_pow(&self, x: &Tensor, p: f64) -> Result<Tensor> {
        real_input(x, "abs_pow")?;
        if !(p >= 1.0) {
            return Err(invalid!("abs_pow exponent must be >= 1, got {p}"));
        }
        if p == 2.0 {
            return self.pointwise(x, |v| v * v, |v| 2.0 * v);
        }
        self.pointwise(
            x,
            move |v| v.abs().powf(p),
            move |v| if v == 0.0 { 0.0 } else { p * v.abs().powf(p - 1.0) * v.signum() },
        )
    }

    /// `x^e` for strictly positive `x`.
    pub fn powf(&self, x: &Tensor, e: f64) -> Result<Tensor> {
        let v = real_input(x, "powf")?;
        if let Some(bad) = v.iter().find(|&&b| !(b > 0.0)) {
            return Err(invalid!("powf requires positive inputs, found {bad}"));
        }
        self.pointwise(x, move |b| b.powf(e), move |b| e * b.powf(e - 1.0))
    }
}
