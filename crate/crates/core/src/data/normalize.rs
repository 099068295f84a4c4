//! Per-channel normalization and the pre/post-processing pipeline around a
//! model's forward pass.

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Tape, Tensor};

pub const NORMALIZER_EPS: f64 = 1e-8;

/// Channelwise `(x - mean) / (std + eps)` with statistics pooled over
/// samples and grid points, so it applies at any resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn channel_layout(x: &Tensor) -> Result<(usize, usize, usize)> {
    if x.rank() < 2 {
        return Err(shape_err!("normalizer expects [B, C, ..], got {:?}", x.shape()));
    }
    let b = x.shape()[0];
    let c = x.shape()[1];
    let inner = x.shape()[2..].iter().product();
    Ok((b, c, inner))
}

impl Normalizer {
    /// Population mean and standard deviation per channel.
    pub fn fit(x: &Tensor) -> Result<Normalizer> {
        let (b, c, inner) = channel_layout(x)?;
        if b * inner == 0 {
            return Err(Error::Invalid("cannot fit a normalizer on empty data".into()));
        }
        let v = x.real_values()?;
        let count = (b * inner) as f64;
        let mut mean = vec![0.0; c];
        let mut std = vec![0.0; c];
        for ch in 0..c {
            let values = || (0..b).flat_map(move |s| v[(s * c + ch) * inner..(s * c + ch + 1) * inner].iter());
            let m = values().sum::<f64>() / count;
            let var = values().map(|&x| (x - m) * (x - m)).sum::<f64>() / count;
            mean[ch] = m;
            std[ch] = var.sqrt();
        }
        Ok(Normalizer { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let layout = channel_layout(x)?;
        if layout.1 != self.channels() {
            return Err(shape_err!("normalizer fitted on {} channels, data has {}", self.channels(), layout.1));
        }
        Ok(layout)
    }

    fn map(&self, x: &Tensor, f: impl Fn(f64, f64, f64) -> f64) -> Result<Tensor> {
        let (_, c, inner) = self.check(x)?;
        let v = x.real_values()?;
        let out = v
            .iter()
            .enumerate()
            .map(|(i, &val)| {
                let ch = (i / inner) % c;
                f(val, self.mean[ch], self.std[ch] + NORMALIZER_EPS)
            })
            .collect();
        Tensor::from_real(x.shape(), out)
    }

    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.map(x, |v, m, s| (v - m) / s)
    }

    pub fn decode_values(&self, x: &Tensor) -> Result<Tensor> {
        self.map(x, |v, m, s| v * s + m)
    }

    /// Differentiable decode `y (std + eps) + mean`.
    pub fn decode(&self, tape: &Tape, y: &Tensor) -> Result<Tensor> {
        self.check(y)?;
        let mut shape = vec![1; y.rank()];
        shape[1] = self.channels();
        let scale = Tensor::from_real(&shape, self.std.iter().map(|s| s + NORMALIZER_EPS).collect())?;
        let shift = Tensor::from_real(&shape, self.mean.clone())?;
        tape.add(&tape.mul(y, &scale)?, &shift)
    }

    /// Statistics as a `[2, C]` tensor (mean row, then std row).
    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::from_real(&[2, self.channels()], [self.mean.clone(), self.std.clone()].concat())
    }

    pub fn from_tensor(t: &Tensor) -> Result<Normalizer> {
        if t.rank() != 2 || t.shape()[0] != 2 {
            return Err(Error::Format(format!("normalizer statistics must be [2, C], got {:?}", t.shape())));
        }
        let v = t.real_values()?;
        let c = t.shape()[1];
        if v[c..].iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::Format("normalizer standard deviations must be non-negative".into()));
        }
        Ok(Normalizer { mean: v[..c].to_vec(), std: v[c..].to_vec() })
    }
}

/// Which normalizations a [`DataProcessor`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessorFlags {
    pub normalize_in: bool,
    pub normalize_out: bool,
}

/// Input normalization before the forward pass and output decoding after
/// it, so losses are computed in physical units. Positional embedding and
/// domain padding are part of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct DataProcessor {
    pub flags: ProcessorFlags,
    pub input: Option<Normalizer>,
    pub output: Option<Normalizer>,
}

const INPUT_NAME: &str = "normalizer.input";
const OUTPUT_NAME: &str = "normalizer.output";

impl DataProcessor {
    pub fn new(flags: ProcessorFlags) -> DataProcessor {
        DataProcessor { flags, input: None, output: None }
    }

    pub fn identity() -> DataProcessor {
        DataProcessor::new(ProcessorFlags { normalize_in: false, normalize_out: false })
    }

    /// Fits the enabled normalizers on training inputs and outputs.
    pub fn fit(&mut self, x: &Tensor, y: &Tensor) -> Result<()> {
        self.input = if self.flags.normalize_in { Some(Normalizer::fit(x)?) } else { None };
        self.output = if self.flags.normalize_out { Some(Normalizer::fit(y)?) } else { None };
        Ok(())
    }

    fn fitted<'a>(enabled: bool, n: &'a Option<Normalizer>, which: &str) -> Result<Option<&'a Normalizer>> {
        match (enabled, n) {
            (false, _) => Ok(None),
            (true, Some(n)) => Ok(Some(n)),
            (true, None) => Err(Error::Invalid(format!("{which} normalizer used before fitting"))),
        }
    }

    pub fn preprocess(&self, x: &Tensor) -> Result<Tensor> {
        match DataProcessor::fitted(self.flags.normalize_in, &self.input, "input")? {
            Some(n) => n.encode(x),
            None => Ok(x.detach()),
        }
    }

    /// Maps model outputs back to physical units (differentiable).
    pub fn postprocess(&self, tape: &Tape, y: &Tensor) -> Result<Tensor> {
        match DataProcessor::fitted(self.flags.normalize_out, &self.output, "output")? {
            Some(n) => n.decode(tape, y),
            None => Ok(y.clone()),
        }
    }

    /// Fitted statistics as named tensors for checkpoints.
    pub fn to_extras(&self) -> Result<Vec<(String, Tensor)>> {
        let mut v = Vec::new();
        if let Some(n) = &self.input {
            v.push((INPUT_NAME.to_string(), n.to_tensor()?));
        }
        if let Some(n) = &self.output {
            v.push((OUTPUT_NAME.to_string(), n.to_tensor()?));
        }
        Ok(v)
    }

    /// Rebuilds a fitted processor from checkpoint extras; presence of the
    /// statistics determines the flags.
    pub fn from_extras(extras: &[(String, Tensor)]) -> Result<DataProcessor> {
        let find = |name: &str| extras.iter().find(|(n, _)| n == name).map(|(_, t)| Normalizer::from_tensor(t)).transpose();
        let input = find(INPUT_NAME)?;
        let output = find(OUTPUT_NAME)?;
        let flags = ProcessorFlags { normalize_in: input.is_some(), normalize_out: output.is_some() };
        Ok(DataProcessor { flags, input, output })
    }
}
