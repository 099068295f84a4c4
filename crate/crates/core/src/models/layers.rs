use crate::error::{shape_err, Result};
use crate::rng::SplitMix64;
use crate::tensor::{Tape, Tensor};

/// Named trainable tensors of a model component.
pub trait Params {
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)>;
}

/// Trainable real scalars; complex entries count twice.
pub fn parameter_count(m: &dyn Params) -> usize {
    m.params().iter().map(|(_, t)| t.numel() * if t.is_complex() { 2 } else { 1 }).sum()
}

/// Turns every parameter into a fresh leaf with the given flag.
pub fn set_requires_grad(m: &mut dyn Params, flag: bool) {
    for (_, t) in m.params_mut() {
        *t = t.clone().requires_grad(flag);
    }
}

pub(crate) fn prefixed<'a>(prefix: &str, items: Vec<(String, &'a Tensor)>) -> Vec<(String, &'a Tensor)> {
    items.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

pub(crate) fn prefixed_mut<'a>(prefix: &str, items: Vec<(String, &'a mut Tensor)>) -> Vec<(String, &'a mut Tensor)> {
    items.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

/// Affine map acting on the channel axis. Weight `[C_out, C_in]`, bias `[C_out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Weight uniform in `(-1/sqrt(C_in), 1/sqrt(C_in))`, zero bias.
    pub fn init(c_in: usize, c_out: usize, rng: &mut SplitMix64) -> Result<Linear> {
        let s = 1.0 / (c_in as f64).sqrt();
        let w = (0..c_in * c_out).map(|_| rng.uniform_symmetric(s)).collect();
        Ok(Linear { weight: Tensor::from_real(&[c_out, c_in], w)?, bias: Tensor::full(&[c_out], 0.0)? })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Rows `[N, C_in] -> [N, C_out]`.
    pub fn forward_rows(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 || x.shape()[1] != self.in_channels() {
            return Err(shape_err!("linear expects [N, {}], got {:?}", self.in_channels(), x.shape()));
        }
        let y = tape.contract(x, &self.weight, &[(1, 1)])?;
        let b = tape.reshape(&self.bias, &[1, self.out_channels()])?;
        tape.add(&y, &b)
    }

    /// Channel-first grids `[B, C_in, n..] -> [B, C_out, n..]`.
    pub fn forward_grid(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        if x.rank() < 2 || x.shape()[1] != self.in_channels() {
            return Err(shape_err!("pointwise layer expects {} channels, got shape {:?}", self.in_channels(), x.shape()));
        }
        let y = tape.contract(&self.weight, x, &[(1, 1)])?;
        let mut perm: Vec<usize> = (0..x.rank()).collect();
        perm.swap(0, 1);
        let y = tape.permute(&y, &perm)?;
        let mut bshape = vec![1; x.rank()];
        bshape[1] = self.out_channels();
        let b = tape.reshape(&self.bias, &bshape)?;
        tape.add(&y, &b)
    }
}

impl Params for Linear {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![("weight".into(), &mut self.weight), ("bias".into(), &mut self.bias)]
    }
}

/// Two linear layers with a gelu in between.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn init(c_in: usize, hidden: usize, c_out: usize, rng: &mut SplitMix64) -> Result<Mlp> {
        let first = Linear::init(c_in, hidden, rng)?;
        let second = Linear::init(hidden, c_out, rng)?;
        Ok(Mlp { first, second })
    }

    pub fn forward_rows(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let h = tape.gelu(&self.first.forward_rows(tape, x)?)?;
        self.second.forward_rows(tape, &h)
    }

    pub fn forward_grid(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let h = tape.gelu(&self.first.forward_grid(tape, x)?)?;
        self.second.forward_grid(tape, &h)
    }
}

impl Params for Mlp {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("0", self.first.params());
        v.extend(prefixed("1", self.second.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = prefixed_mut("0", self.first.params_mut());
        v.extend(prefixed_mut("1", self.second.params_mut()));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_parameter_count() {
        let l = Linear::init(3, 5, &mut SplitMix64::new(0)).unwrap();
        assert_eq!(parameter_count(&l), 20);
    }

    #[test]
    fn rows_and_grid_agree() {
        let t = Tape::new();
        let l = Linear::init(2, 3, &mut SplitMix64::new(1)).unwrap();
        let l = Linear { bias: Tensor::from_real(&[3], vec![0.1, 0.2, 0.3]).unwrap(), ..l };
        let x = Tensor::from_real(&[1, 2, 4], (0..8).map(|i| i as f64 * 0.25 - 1.0).collect()).unwrap();
        let g = l.forward_grid(&t, &x).unwrap();
        let rows = t.permute(&t.reshape(&x, &[2, 4]).unwrap(), &[1, 0]).unwrap();
        let r = l.forward_rows(&t, &rows).unwrap();
        let r = t.permute(&r, &[1, 0]).unwrap();
        assert!(g.reshaped(&[3, 4]).unwrap().bit_eq(&r));
        let w = l.weight.real_values().unwrap();
        let want = w[2] * x.at(&[0, 0, 2]).unwrap() + w[3] * x.at(&[0, 1, 2]).unwrap() + 0.2;
        assert_eq!(g.at(&[0, 1, 2]).unwrap(), want);
    }
}
