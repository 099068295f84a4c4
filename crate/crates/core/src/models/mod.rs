//! Resolution-agnostic operator models and their checkpoints.

mod checkpoint;
mod fno;
mod gno;
mod grid;
mod layers;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use fno::{factorization_str, parse_factorization, parse_list, Fno, FnoBlock, FnoConfig, ForwardOptions};
pub use gno::{Gno, GnoConfig, MlpKernel};
pub use grid::{
    coordinate_channels, domain_pad, domain_unpad, grid_embedding, pad_amount, GridFunction, PadRecord,
};
pub use layers::{parameter_count, set_requires_grad, Linear, Mlp, Params};

use crate::error::{Error, Result};
use crate::format::KeyValues;
use crate::tensor::{Tape, Tensor};

/// Any model trainable on grid data.
#[derive(Debug, Clone)]
pub enum Model {
    Fno(Fno),
    Gno(Gno),
}

impl Model {
    pub fn from_kv(kv: &KeyValues) -> Result<Model> {
        match kv.get("model.kind").map(String::as_str) {
            Some("fno") => Ok(Model::Fno(Fno::new(FnoConfig::from_kv(kv)?)?)),
            Some("gno") => Ok(Model::Gno(Gno::new(GnoConfig::from_kv(kv)?)?)),
            Some(other) => Err(Error::Config(format!("unknown model kind {other:?}"))),
            None => Err(Error::Config("missing key model.kind".into())),
        }
    }

    pub fn config_kv(&self) -> KeyValues {
        match self {
            Model::Fno(m) => m.config.to_kv(),
            Model::Gno(m) => m.config.to_kv(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Fno(m) => m.config.dim,
            Model::Gno(m) => m.config.coord_dim,
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            Model::Fno(m) => m.config.in_channels,
            Model::Gno(m) => m.config.in_channels,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            Model::Fno(m) => m.config.out_channels,
            Model::Gno(m) => m.config.out_channels,
        }
    }

    /// Forward pass on grid data `[B, C, n..]`. Only the FNO supports output
    /// resampling and mode masks; the GNO evaluates on the input grid.
    pub fn forward_grid(&self, tape: &Tape, x: &Tensor, opts: &ForwardOptions) -> Result<Tensor> {
        match self {
            Model::Fno(m) => m.forward(tape, x, opts),
            Model::Gno(m) => {
                if let Some(out) = opts.output_sizes {
                    if out != &x.shape()[2..] {
                        return Err(Error::Invalid("GNO grid evaluation cannot change resolution".into()));
                    }
                }
                m.forward_grid(tape, x)
            }
        }
    }

    /// Copy whose parameters do not require gradients (cheap, shares data).
    pub fn detached(&self) -> Model {
        let mut m = self.clone();
        set_requires_grad(&mut m, false);
        m
    }
}

impl Params for Model {
    fn params(&self) -> Vec<(String, &Tensor)> {
        match self {
            Model::Fno(m) => m.params(),
            Model::Gno(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        match self {
            Model::Fno(m) => m.params_mut(),
            Model::Gno(m) => m.params_mut(),
        }
    }
}
