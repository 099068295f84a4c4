//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use opnet::data::{DataProcessor, ProcessorFlags};
use opnet::format::KeyValues;
use opnet::models::{parse_factorization, parse_list, FnoConfig, GnoConfig, Model};
use opnet::training::{IncrementalModes, LossSpec, StepLr, TrainConfig};

use crate::CliError;

/// Every accepted key with its default. `None` marks a required key.
const KEYS: &[(&str, Option<&str>)] = &[
    ("seed", Some("0")),
    ("output_dir", Some("run")),
    ("data.kind", Some("darcy")),
    ("data.path", None),
    ("data.n_train", Some("all")),
    ("data.n_test", Some("0")),
    ("data.resolution", Some("native")),
    ("data.val_resolutions", Some("native")),
    ("model.kind", Some("fno")),
    ("model.hidden_channels", Some("32")),
    ("model.n_layers", Some("4")),
    ("model.modes", Some("8")),
    ("model.padding_fraction", Some("0")),
    ("model.factorization", Some("dense")),
    ("model.positional_embedding", Some("true")),
    ("model.kernel_hidden", Some("16")),
    ("model.radius", Some("0.1")),
    ("training.epochs", Some("50")),
    ("training.batch_size", Some("16")),
    ("training.lr", Some("0.001")),
    ("training.gamma", Some("0.5")),
    ("training.step_size", Some("10")),
    ("training.loss", Some("l2")),
    ("training.incremental.start", Some("off")),
    ("training.incremental.increment", Some("1")),
    ("training.incremental.step", Some("5")),
    ("training.report_wall_time", Some("false")),
    ("training.normalized_loss", Some("false")),
    ("normalize.input", Some("true")),
    ("normalize.output", Some("true")),
];

/// A parsed configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// How many samples of a split to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Count {
    All,
    Exactly(usize),
}

/// A spatial resolution, either as stored or a single size per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Native,
    Size(usize),
}

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut given = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("line {}: expected key = value, got {raw:?}", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|(name, _)| *name == k) {
                return Err(usage(format!("line {}: unknown configuration key {k:?}", lineno + 1)));
            }
            if given.insert(k.to_string(), v.to_string()).is_some() {
                return Err(usage(format!("line {}: duplicate key {k:?}", lineno + 1)));
            }
        }
        let mut values = BTreeMap::new();
        for (k, default) in KEYS {
            match (given.remove(*k), default) {
                (Some(v), _) => values.insert(k.to_string(), v),
                (None, Some(d)) => values.insert(k.to_string(), d.to_string()),
                (None, None) => return Err(usage(format!("missing required key {k:?}"))),
            };
        }
        let cfg = RunConfig { values };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("every key has a value after parsing")
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse().map_err(|_| usage(format!("invalid value {v:?} for {key}")))
    }

    /// Fully resolved text, one `key = value` per line in sorted order.
    pub fn resolved_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn to_kv(&self) -> KeyValues {
        self.values.clone()
    }

    /// Checks every typed value once so later accessors cannot fail on syntax.
    fn validate(&self) -> Result<(), CliError> {
        self.seed()?;
        self.n_train()?;
        self.n_test()?;
        self.resolution()?;
        self.val_resolutions()?;
        self.train_config()?;
        self.processor_flags()?;
        match self.get("model.kind") {
            "fno" | "gno" => {}
            other => return Err(usage(format!("unknown model.kind {other:?} (fno or gno)"))),
        }
        match self.get("data.kind") {
            "darcy" | "burgers" => {}
            other => return Err(usage(format!("unknown data.kind {other:?} (darcy or burgers)"))),
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.parsed("seed")
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output_dir"))
    }

    pub fn data_path(&self) -> PathBuf {
        PathBuf::from(self.get("data.path"))
    }

    fn count(&self, key: &str) -> Result<Count, CliError> {
        match self.get(key) {
            "all" => Ok(Count::All),
            _ => Ok(Count::Exactly(self.parsed(key)?)),
        }
    }

    pub fn n_train(&self) -> Result<Count, CliError> {
        self.count("data.n_train")
    }

    pub fn n_test(&self) -> Result<usize, CliError> {
        self.parsed("data.n_test")
    }

    fn res(v: &str) -> Result<Resolution, CliError> {
        match v.trim() {
            "native" => Ok(Resolution::Native),
            s => s
                .parse()
                .ok()
                .filter(|&n: &usize| n >= 2)
                .map(Resolution::Size)
                .ok_or_else(|| usage(format!("invalid resolution {s:?}"))),
        }
    }

    pub fn resolution(&self) -> Result<Resolution, CliError> {
        RunConfig::res(self.get("data.resolution"))
    }

    pub fn val_resolutions(&self) -> Result<Vec<Resolution>, CliError> {
        self.get("data.val_resolutions").split(',').map(RunConfig::res).collect()
    }

    pub fn processor_flags(&self) -> Result<ProcessorFlags, CliError> {
        Ok(ProcessorFlags { normalize_in: self.parsed("normalize.input")?, normalize_out: self.parsed("normalize.output")? })
    }

    pub fn processor(&self) -> Result<DataProcessor, CliError> {
        Ok(DataProcessor::new(self.processor_flags()?))
    }

    /// Training settings; the shuffle stream is seeded with `seed + 1`.
    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let incremental = match self.get("training.incremental.start") {
            "off" => None,
            s => Some(IncrementalModes {
                start: parse_list(s).map_err(|e| usage(e.to_string()))?,
                increment: self.parsed("training.incremental.increment")?,
                step: self.parsed("training.incremental.step")?,
            }),
        };
        let config = TrainConfig {
            epochs: self.parsed("training.epochs")?,
            batch_size: self.parsed("training.batch_size")?,
            schedule: StepLr {
                lr0: self.parsed("training.lr")?,
                gamma: self.parsed("training.gamma")?,
                step_size: self.parsed("training.step_size")?,
            },
            loss: LossSpec::parse(self.get("training.loss")).map_err(|e| usage(e.to_string()))?,
            incremental,
            shuffle_seed: self.seed()?.wrapping_add(1),
            report_wall_time: self.parsed("training.report_wall_time")?,
            normalized_loss: self.parsed("training.normalized_loss")?,
        };
        config.validate().map_err(|e| usage(e.to_string()))?;
        Ok(config)
    }

    /// Builds the model for data with `dim` spatial axes; parameters are
    /// initialized from `seed + 2`.
    pub fn model(&self, dim: usize, in_channels: usize, out_channels: usize) -> Result<Model, CliError> {
        let seed = self.seed()?.wrapping_add(2);
        let bad = |e: opnet::Error| usage(e.to_string());
        let model = match self.get("model.kind") {
            "fno" => {
                let mut modes = parse_list(self.get("model.modes")).map_err(bad)?;
                if modes.len() == 1 {
                    modes = vec![modes[0]; dim];
                }
                let config = FnoConfig {
                    dim,
                    in_channels,
                    out_channels,
                    hidden_channels: self.parsed("model.hidden_channels")?,
                    n_layers: self.parsed("model.n_layers")?,
                    modes,
                    padding_fraction: self.parsed("model.padding_fraction")?,
                    factorization: parse_factorization(self.get("model.factorization")).map_err(bad)?,
                    positional_embedding: self.parsed("model.positional_embedding")?,
                    seed,
                };
                Model::Fno(opnet::models::Fno::new(config).map_err(bad)?)
            }
            _ => {
                let config = GnoConfig {
                    coord_dim: dim,
                    in_channels,
                    out_channels,
                    hidden_channels: self.parsed("model.hidden_channels")?,
                    kernel_hidden: self.parsed("model.kernel_hidden")?,
                    radius: self.parsed("model.radius")?,
                    seed,
                };
                Model::Gno(opnet::models::Gno::new(config).map_err(bad)?)
            }
        };
        Ok(model)
    }
}
