use crate::error::{shape_err, Error, Result};
use crate::spectral::ModeSpec;
use crate::tensor::{Gradients, Storage, Tensor, C64};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction and no weight decay. Complex parameters are
/// updated as independent real and imaginary parts.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new()
    }
}

fn flat(s: &Storage) -> Vec<f64> {
    match s {
        Storage::Real(v) => v.clone(),
        Storage::Complex(v) => v.iter().flat_map(|z| [z.re, z.im]).collect(),
    }
}

fn unflat(like: &Storage, v: Vec<f64>) -> Storage {
    match like {
        Storage::Real(_) => Storage::Real(v),
        Storage::Complex(_) => Storage::Complex(v.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()),
    }
}

impl Adam {
    pub fn new() -> Adam {
        Adam { beta1: ADAM_BETA1, beta2: ADAM_BETA2, eps: ADAM_EPS, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One update of every parameter. Parameters without a gradient are
    /// treated as having a zero gradient. All gradients are checked for
    /// finiteness before anything is modified.
    pub fn step(&mut self, params: Vec<(String, &mut Tensor)>, grads: &Gradients, lr: f64) -> Result<()> {
        let gs: Vec<Option<Vec<f64>>> = params.iter().map(|(_, p)| grads.storage(p).map(flat)).collect();
        for ((name, p), g) in params.iter().zip(&gs) {
            if let Some(g) = g {
                if g.len() != 2 * p.numel() && g.len() != p.numel() {
                    return Err(shape_err!("gradient of {name} has {} entries for {} values", g.len(), p.numel()));
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("gradient of parameter {name}")));
                }
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|(_, p)| vec![0.0; flat(p.storage()).len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Invalid(format!("optimizer tracks {} parameters, got {}", self.m.len(), params.len())));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, ((_, p), g)) in params.into_iter().zip(gs).enumerate() {
            let Some(g) = g else { continue };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let mut w = flat(p.storage());
            for k in 0..w.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mhat = m[k] / c1;
                let vhat = v[k] / c2;
                w[k] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
            let flag = p.requires_grad_flag();
            *p = Tensor::from_parts(p.shape().to_vec(), unflat(p.storage(), w)).requires_grad(flag);
        }
        Ok(())
    }
}

/// `lr0 * gamma^floor(epoch / step_size)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLr {
    pub lr0: f64,
    pub gamma: f64,
    pub step_size: usize,
}

impl StepLr {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("step decay factor must lie in (0, 1], got {}", self.gamma)));
        }
        if self.step_size == 0 {
            return Err(Error::Config("step decay interval must be at least 1".into()));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("learning rate must be non-negative, got {}", self.lr0)));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.lr0 * self.gamma.powi((epoch / self.step_size) as i32)
    }
}

/// Epoch-driven growth of the active Fourier modes:
/// `m_i = min(max_i, start_i + floor(epoch / step) * increment)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncrementalModes {
    pub start: Vec<usize>,
    pub increment: usize,
    pub step: usize,
}

impl IncrementalModes {
    pub fn validate(&self, max: &ModeSpec) -> Result<()> {
        if self.start.len() != max.dims() {
            return Err(Error::Config(format!("{} start modes for {} axes", self.start.len(), max.dims())));
        }
        if self.step == 0 {
            return Err(Error::Config("incremental mode step must be at least 1".into()));
        }
        if let Some(i) = (0..self.start.len()).find(|&i| self.start[i] == 0 || self.start[i] > max.modes()[i]) {
            return Err(Error::Config(format!(
                "start modes {} on axis {i} must lie in 1..={}",
                self.start[i],
                max.modes()[i]
            )));
        }
        Ok(())
    }
}

/// Active modes at `epoch`; without a schedule all modes are active.
pub fn incremental_modes(schedule: Option<&IncrementalModes>, max: &ModeSpec, epoch: usize) -> Result<ModeSpec> {
    let Some(s) = schedule else { return Ok(max.clone()) };
    s.validate(max)?;
    let grow = (epoch / s.step).saturating_mul(s.increment);
    ModeSpec::new(s.start.iter().zip(max.modes()).map(|(&a, &m)| m.min(a.saturating_add(grow))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tape;

    #[test]
    fn quadratic_hand_step() {
        let tape = Tape::new();
        let mut w = Tensor::scalar(1.0).requires_grad(true);
        let loss = tape.mul(&w, &w).unwrap();
        let grads = tape.backward(&loss).unwrap();
        let mut adam = Adam::new();
        adam.step(vec![("w".into(), &mut w)], &grads, 0.1).unwrap();
        let want = 1.0 - 0.1 * (2.0 / (2.0 + 1e-8));
        assert!((w.item().unwrap() - want).abs() < 1e-15);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let tape = Tape::new();
        let mut w = Tensor::scalar(0.0).requires_grad(true);
        let loss = tape.scale(&w, f64::NAN).unwrap();
        let grads = tape.backward(&loss).unwrap();
        let e = Adam::new().step(vec![("blocks.0.skip.weight".into(), &mut w)], &grads, 0.1).unwrap_err();
        assert!(e.to_string().contains("blocks.0.skip.weight"));
        assert_eq!(w.item().unwrap(), 0.0);
    }

    #[test]
    fn schedules() {
        let s = StepLr { lr0: 1e-3, gamma: 0.5, step_size: 10 };
        assert_eq!(s.lr(0), 1e-3);
        assert!((s.lr(25) - 2.5e-4).abs() < 1e-18);
        let max = ModeSpec::new(vec![8]).unwrap();
        let inc = IncrementalModes { start: vec![2], increment: 2, step: 5 };
        assert_eq!(incremental_modes(Some(&inc), &max, 0).unwrap().modes(), &[2]);
        assert_eq!(incremental_modes(Some(&inc), &max, 12).unwrap().modes(), &[6]);
        assert_eq!(incremental_modes(Some(&inc), &max, 100).unwrap().modes(), &[8]);
        assert_eq!(incremental_modes(None, &max, 3).unwrap(), max);
        let bad = IncrementalModes { start: vec![9], increment: 1, step: 1 };
        assert!(incremental_modes(Some(&bad), &max, 0).is_err());
    }
}
