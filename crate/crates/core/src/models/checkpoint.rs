//! `NOCK` checkpoints: configuration echo plus every named parameter.

use std::path::Path;

use super::layers::Params;
use super::Model;
use crate::error::{Error, Result};
use crate::format::{self, KeyValues};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NOCK";
const EXTRA_PREFIX: &str = "extra.";

/// A loaded checkpoint: the model, auxiliary tensors (e.g. normalizer
/// statistics) and the configuration block as stored.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub extras: Vec<(String, Tensor)>,
    pub meta: KeyValues,
}

impl Checkpoint {
    pub fn extra(&self, name: &str) -> Option<&Tensor> {
        self.extras.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

pub fn encode_checkpoint(model: &Model, extras: &[(String, Tensor)], meta: &KeyValues) -> Result<Vec<u8>> {
    let mut kv = meta.clone();
    kv.extend(model.config_kv());
    let mut records: Vec<(String, Tensor)> = model.params().into_iter().map(|(n, t)| (n, t.detach())).collect();
    records.extend(extras.iter().map(|(n, t)| (format!("{EXTRA_PREFIX}{n}"), t.detach())));
    format::encode(CHECKPOINT_MAGIC, &kv, &records)
}

pub fn save_checkpoint(path: &Path, model: &Model, extras: &[(String, Tensor)], meta: &KeyValues) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, extras, meta)?)?;
    Ok(())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let c = format::decode(CHECKPOINT_MAGIC, bytes)?;
    let mut model = Model::from_kv(&c.meta)?;
    let mut extras = Vec::new();
    let mut stored: Vec<(String, Tensor)> = Vec::new();
    for (name, t) in c.tensors {
        match name.strip_prefix(EXTRA_PREFIX) {
            Some(e) => extras.push((e.to_string(), t)),
            None => stored.push((name, t)),
        }
    }
    let mut slots = model.params_mut();
    if slots.len() != stored.len() {
        return Err(Error::Format(format!(
            "checkpoint holds {} parameters, its configuration expects {}",
            stored.len(),
            slots.len()
        )));
    }
    for (name, slot) in slots.iter_mut() {
        let pos = stored
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Format(format!("parameter {name} missing from checkpoint")))?;
        let t = stored.swap_remove(pos).1;
        if t.shape() != slot.shape() || t.kind() != slot.kind() {
            return Err(Error::Format(format!(
                "parameter {name}: stored {} {:?} but configuration expects {} {:?}",
                t.kind(),
                t.shape(),
                slot.kind(),
                slot.shape()
            )));
        }
        **slot = t;
    }
    drop(slots);
    Ok(Checkpoint { model, extras, meta: c.meta })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
