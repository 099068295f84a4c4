//! Dataset generation and the `NODF` dataset container.

use std::path::Path;

use super::burgers::solve_burgers;
use super::darcy::{darcy_coefficient, solve_darcy, DEFAULT_A_HI, DEFAULT_A_LO};
use super::grf::{sample_grf, GrfSpec};
use crate::error::{Error, Result};
use crate::format::{self, KeyValues};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

pub const DATASET_MAGIC: &[u8; 4] = b"NODF";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Darcy,
    Burgers,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Result<DatasetKind> {
        match s {
            "darcy" => Ok(DatasetKind::Darcy),
            "burgers" => Ok(DatasetKind::Burgers),
            other => Err(Error::Config(format!("unknown dataset kind {other:?} (expected darcy or burgers)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Darcy => "darcy",
            DatasetKind::Burgers => "burgers",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            DatasetKind::Darcy => 2,
            DatasetKind::Burgers => 1,
        }
    }
}

/// Generator parameters. Darcy draws its coefficient from `grf`, Burgers
/// its initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub kind: DatasetKind,
    pub resolution: usize,
    pub grf: GrfSpec,
    pub a_hi: f64,
    pub a_lo: f64,
    pub forcing: f64,
    pub nu: f64,
    pub final_time: f64,
}

pub const BURGERS_GRF: GrfSpec = GrfSpec { tau: 5.0, alpha: 2.0, sigma: 25.0 };
pub const DARCY_GRF: GrfSpec = GrfSpec { tau: 3.0, alpha: 2.0, sigma: 1.0 };

impl GeneratorParams {
    pub fn darcy(resolution: usize) -> GeneratorParams {
        GeneratorParams {
            kind: DatasetKind::Darcy,
            resolution,
            grf: DARCY_GRF,
            a_hi: DEFAULT_A_HI,
            a_lo: DEFAULT_A_LO,
            forcing: 1.0,
            nu: 0.01,
            final_time: 1.0,
        }
    }

    pub fn burgers(resolution: usize) -> GeneratorParams {
        GeneratorParams { kind: DatasetKind::Burgers, grf: BURGERS_GRF, ..GeneratorParams::darcy(resolution) }
    }

    pub fn sizes(&self) -> Vec<usize> {
        vec![self.resolution; self.kind.dim()]
    }

    pub fn validate(&self) -> Result<()> {
        self.grf.validate(self.kind.dim())?;
        match self.kind {
            DatasetKind::Darcy => {
                if self.resolution < 4 {
                    return Err(Error::Invalid(format!("Darcy resolution must be >= 4, got {}", self.resolution)));
                }
                if !(self.a_hi > 0.0 && self.a_lo > 0.0) {
                    return Err(Error::Invalid("Darcy coefficient values must be positive".into()));
                }
                if !self.forcing.is_finite() {
                    return Err(Error::Invalid("Darcy forcing must be finite".into()));
                }
            }
            DatasetKind::Burgers => {
                if self.resolution < 16 || !self.resolution.is_power_of_two() {
                    return Err(Error::Invalid(format!(
                        "Burgers resolution must be a power of two >= 16, got {}",
                        self.resolution
                    )));
                }
                if !(self.nu > 0.0) || !(self.final_time >= 0.0) {
                    return Err(Error::Invalid("Burgers needs nu > 0 and final time >= 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        put("kind", self.kind.as_str().into());
        put("resolution", self.resolution.to_string());
        put("grf.tau", self.grf.tau.to_string());
        put("grf.alpha", self.grf.alpha.to_string());
        put("grf.sigma", self.grf.sigma.to_string());
        match self.kind {
            DatasetKind::Darcy => {
                put("darcy.a_hi", self.a_hi.to_string());
                put("darcy.a_lo", self.a_lo.to_string());
                put("darcy.forcing", self.forcing.to_string());
            }
            DatasetKind::Burgers => {
                put("burgers.nu", self.nu.to_string());
                put("burgers.final_time", self.final_time.to_string());
            }
        }
        kv
    }
}

/// Generates one `(x, y)` sample pair from its own seed.
pub fn generate_sample(params: &GeneratorParams, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = SplitMix64::new(seed);
    let sizes = params.sizes();
    let field = sample_grf(&sizes, &params.grf, &mut rng)?;
    match params.kind {
        DatasetKind::Darcy => {
            let n = params.resolution;
            let a = darcy_coefficient(&field, params.a_hi, params.a_lo);
            let u = solve_darcy(&a, &vec![params.forcing; n * n], n)?.u;
            Ok((a, u))
        }
        DatasetKind::Burgers => {
            let u = solve_burgers(&field, params.nu, params.final_time)?;
            Ok((field, u))
        }
    }
}

/// Samples `start..start + count`; sample `i` uses seed `seed + i`. Returns
/// `x` and `y` shaped `[count, 1, n..]`.
pub fn generate_samples(params: &GeneratorParams, seed: u64, start: usize, count: usize) -> Result<(Tensor, Tensor)> {
    params.validate()?;
    if count == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in start..start + count {
        let (x, y) = generate_sample(params, seed.wrapping_add(i as u64))?;
        xs.extend(x);
        ys.extend(y);
    }
    let mut shape = vec![count, 1];
    shape.extend(params.sizes());
    Ok((Tensor::from_real(&shape, xs)?, Tensor::from_real(&shape, ys)?))
}

/// Named tensors plus metadata.
#[derive(Debug, Clone)]
pub struct DatasetFile {
    pub meta: KeyValues,
    pub tensors: Vec<(String, Tensor)>,
}

/// Bit-exact comparison of metadata and tensors.
impl PartialEq for DatasetFile {
    fn eq(&self, other: &DatasetFile) -> bool {
        self.meta == other.meta
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|((a, x), (b, y))| a == b && x.bit_eq(y))
    }
}

impl DatasetFile {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::Format(format!("dataset has no tensor named {name:?}")))
    }

    pub fn count(&self) -> Result<usize> {
        let x = self.tensors.first().ok_or_else(|| Error::Format("dataset holds no tensors".into()))?;
        Ok(x.1.shape()[0])
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        format::encode(DATASET_MAGIC, &self.meta, &self.tensors)
    }

    pub fn decode(bytes: &[u8]) -> Result<DatasetFile> {
        let c = format::decode(DATASET_MAGIC, bytes)?;
        let file = DatasetFile { meta: c.meta, tensors: c.tensors };
        file.check_declared()?;
        Ok(file)
    }

    /// Checks the declared `count` and `resolution` against every tensor.
    fn check_declared(&self) -> Result<()> {
        let parse = |key: &str| -> Result<Option<usize>> {
            match self.meta.get(key) {
                None => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| Error::Format(format!("metadata {key}={v:?} is not an integer"))),
            }
        };
        let count = parse("count")?;
        let res = parse("resolution")?;
        for (name, t) in &self.tensors {
            if let Some(c) = count {
                if t.shape().first() != Some(&c) {
                    return Err(Error::Format(format!("tensor {name} has shape {:?} but count is {c}", t.shape())));
                }
            }
            if let Some(r) = res {
                if t.rank() < 3 || t.shape()[2..].iter().any(|&n| n != r) {
                    return Err(Error::Format(format!("tensor {name} has shape {:?} but resolution is {r}", t.shape())));
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        format::write_file(path, DATASET_MAGIC, &self.meta, &self.tensors)
    }

    pub fn read(path: &Path) -> Result<DatasetFile> {
        DatasetFile::decode(&std::fs::read(path)?)
    }
}

/// Generates samples `0..count` into a dataset with inputs `x`, outputs `y`
/// and the generator parameters, seed and count as metadata.
pub fn generate_dataset(params: &GeneratorParams, count: usize, seed: u64) -> Result<DatasetFile> {
    let (x, y) = generate_samples(params, seed, 0, count)?;
    let mut meta = params.to_kv();
    meta.insert("count".into(), count.to_string());
    meta.insert("seed".into(), seed.to_string());
    Ok(DatasetFile { meta, tensors: vec![("x".into(), x), ("y".into(), y)] })
}
