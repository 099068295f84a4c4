use std::time::Instant;

use super::loss::{relative_lp_per_sample, LossSpec};
use super::optim::{incremental_modes, Adam, IncrementalModes, StepLr};
use super::report::{resolution_label, EpochRecord, TrainReport};
use crate::data::DataProcessor;
use crate::error::{shape_err, Error, Result};
use crate::models::{ForwardOptions, Model, Params};
use crate::rng::SplitMix64;
use crate::spectral::ModeSpec;
use crate::tensor::{Tape, Tensor};

/// Batch size used for evaluation; per-sample results do not depend on it.
pub const EVAL_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: StepLr,
    pub loss: LossSpec,
    pub incremental: Option<IncrementalModes>,
    pub shuffle_seed: u64,
    /// Record wall-clock time per epoch (otherwise 0, keeping reports
    /// byte-identical across runs).
    pub report_wall_time: bool,
    /// Compare raw model outputs with normalized targets instead of
    /// decoding outputs to physical units.
    pub normalized_loss: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.schedule.validate()?;
        self.loss.validate()
    }
}

/// Held-out data at one resolution.
#[derive(Debug, Clone)]
pub struct ValidationSet {
    pub label: String,
    pub x: Tensor,
    pub y: Tensor,
}

impl ValidationSet {
    pub fn new(x: Tensor, y: Tensor) -> Result<ValidationSet> {
        if x.rank() < 3 {
            return Err(shape_err!("validation inputs must be [B, C, n..], got {:?}", x.shape()));
        }
        Ok(ValidationSet { label: resolution_label(&x.shape()[2..]), x, y })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// A non-finite loss or gradient stopped training; the model holds the
    /// parameters from before the failing step.
    Aborted { epoch: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub report: TrainReport,
    pub status: TrainStatus,
    /// Active modes after the last epoch, when narrower than the model's.
    pub active_modes: Option<ModeSpec>,
}

/// Rows `idx` of the leading axis.
pub fn select_samples(x: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let b = x.shape()[0];
    let row = x.numel() / b.max(1);
    let v = x.real_values()?;
    let mut out = Vec::with_capacity(idx.len() * row);
    for &i in idx {
        if i >= b {
            return Err(shape_err!("sample {i} out of range for {b} samples"));
        }
        out.extend_from_slice(&v[i * row..(i + 1) * row]);
    }
    let mut shape = x.shape().to_vec();
    shape[0] = idx.len();
    Tensor::from_real(&shape, out)
}

/// Active modes as forward options expect them: `None` when all modes are
/// active (or the model has none).
pub fn effective_active(model: &Model, active: Option<&ModeSpec>) -> Option<ModeSpec> {
    match (model, active) {
        (Model::Fno(f), Some(a)) if a != &f.config.mode_spec() => Some(a.clone()),
        _ => None,
    }
}

/// Physical-space predictions for `x`, evaluated in batches of
/// [`EVAL_BATCH`].
pub fn predict(model: &Model, processor: &DataProcessor, x: &Tensor, opts: &ForwardOptions) -> Result<Tensor> {
    let m = model.detached();
    let b = x.shape()[0];
    let mut parts: Vec<f64> = Vec::new();
    let mut shape = Vec::new();
    for start in (0..b).step_by(EVAL_BATCH) {
        let idx: Vec<usize> = (start..(start + EVAL_BATCH).min(b)).collect();
        let tape = Tape::new();
        let xb = processor.preprocess(&select_samples(x, &idx)?)?;
        let out = processor.postprocess(&tape, &m.forward_grid(&tape, &xb, opts)?)?;
        shape = out.shape().to_vec();
        parts.extend_from_slice(out.real_values()?);
    }
    shape[0] = b;
    Tensor::from_real(&shape, parts)
}

/// Per-sample relative L2 errors of the model on `(x, y)`. Outputs are
/// synthesized on the grid of `y`.
pub fn evaluate_per_sample(
    model: &Model,
    processor: &DataProcessor,
    x: &Tensor,
    y: &Tensor,
    active: Option<&ModeSpec>,
) -> Result<Vec<f64>> {
    if x.shape()[0] != y.shape()[0] {
        return Err(shape_err!("{} inputs but {} targets", x.shape()[0], y.shape()[0]));
    }
    let out_sizes = y.shape()[2..].to_vec();
    let active = effective_active(model, active);
    let opts = ForwardOptions {
        output_sizes: (out_sizes != x.shape()[2..]).then_some(out_sizes.as_slice()),
        active_modes: active.as_ref(),
    };
    let pred = predict(model, processor, x, &opts)?;
    let tape = Tape::new();
    let per = relative_lp_per_sample(&tape, &pred, y, 2.0)?;
    Ok(per.real_values()?.to_vec())
}

/// Mean over samples, accumulated in sample order.
pub fn mean_metric(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn evaluate(model: &Model, processor: &DataProcessor, x: &Tensor, y: &Tensor, active: Option<&ModeSpec>) -> Result<f64> {
    Ok(mean_metric(&evaluate_per_sample(model, processor, x, y, active)?))
}

fn check_targets(y: &Tensor) -> Result<()> {
    let b = y.shape()[0];
    let row = y.numel() / b.max(1);
    let v = y.real_values()?;
    for i in 0..b {
        if v[i * row..(i + 1) * row].iter().all(|&e| e == 0.0) {
            return Err(Error::Invalid(format!("target of training sample {i} has zero norm")));
        }
    }
    Ok(())
}

/// Adam training with step decay, seeded shuffling, optional incremental
/// modes and per-epoch validation. `observe` sees every finished epoch.
pub fn train(
    mut model: Model,
    processor: &DataProcessor,
    x: &Tensor,
    y: &Tensor,
    validation: &[ValidationSet],
    config: &TrainConfig,
    observe: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if x.rank() != model.dim() + 2 || y.rank() != x.rank() || x.shape()[0] != y.shape()[0] {
        return Err(shape_err!("training data {:?} -> {:?} does not fit the model", x.shape(), y.shape()));
    }
    if x.shape()[1] != model.in_channels() || y.shape()[1] != model.out_channels() {
        return Err(shape_err!("training data channels {} -> {} do not fit the model", x.shape()[1], y.shape()[1]));
    }
    check_targets(y)?;
    let max_modes = match &model {
        Model::Fno(f) => Some(f.config.mode_spec()),
        Model::Gno(_) => {
            if config.incremental.is_some() {
                return Err(Error::Config("incremental modes require an FNO".into()));
            }
            None
        }
    };
    if let (Some(s), Some(m)) = (&config.incremental, &max_modes) {
        s.validate(m)?;
    }
    let d = model.dim();
    let n = x.shape()[0];
    let xs = processor.preprocess(x)?;
    let targets = if config.normalized_loss {
        match &processor.output {
            Some(norm) => norm.encode(y)?,
            None => return Err(Error::Config("normalized loss needs output normalization".into())),
        }
    } else {
        y.detach()
    };

    let mut report = TrainReport { labels: validation.iter().map(|v| v.label.clone()).collect(), records: vec![] };
    let mut rng = SplitMix64::new(config.shuffle_seed);
    let mut adam = Adam::new();
    let mut active = max_modes.clone();
    set_trainable(&mut model);
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let lr = config.schedule.lr(epoch);
        if let Some(m) = &max_modes {
            active = Some(incremental_modes(config.incremental.as_ref(), m, epoch)?);
        }
        let mask = effective_active(&model, active.as_ref());
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let tape = Tape::new();
            let xb = select_samples(&xs, batch)?;
            let yb = select_samples(&targets, batch)?;
            let opts = ForwardOptions { output_sizes: None, active_modes: mask.as_ref() };
            let out = model.forward_grid(&tape, &xb, &opts)?;
            let pred = if config.normalized_loss { out } else { processor.postprocess(&tape, &out)? };
            let per = config.loss.per_sample(&tape, &pred, &yb, d)?;
            let per_values = per.real_values()?.to_vec();
            let loss = tape.mean_all(&per)?;
            if !loss.item()?.is_finite() {
                return Ok(aborted(model, report, epoch, "non-finite training loss".into(), active));
            }
            let grads = tape.backward(&loss)?;
            let before = model.clone();
            if let Err(e) = adam.step(model.params_mut(), &grads, lr) {
                match e {
                    Error::NonFinite(msg) => return Ok(aborted(before, report, epoch, format!("non-finite {msg}"), active)),
                    other => return Err(other),
                }
            }
            if let Some((name, _)) = model.params().into_iter().find(|(_, t)| !t.storage().is_finite()) {
                return Ok(aborted(before, report, epoch, format!("parameter {name} became non-finite"), active));
            }
            total += per_values.iter().sum::<f64>();
        }
        let mut val = Vec::with_capacity(validation.len());
        for set in validation {
            val.push(evaluate(&model, processor, &set.x, &set.y, active.as_ref())?);
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: total / n as f64,
            lr,
            active_modes: active.as_ref().map(|a| a.modes().to_vec()).unwrap_or_default(),
            wall_ms: if config.report_wall_time { started.elapsed().as_millis() as u64 } else { 0 },
            val,
        };
        observe(&record);
        report.records.push(record);
    }
    let active_modes = effective_active(&model, active.as_ref());
    Ok(TrainOutcome { model, report, status: TrainStatus::Completed, active_modes })
}

fn set_trainable(model: &mut Model) {
    crate::models::set_requires_grad(model, true);
}

fn aborted(model: Model, report: TrainReport, epoch: usize, reason: String, active: Option<ModeSpec>) -> TrainOutcome {
    let active_modes = effective_active(&model, active.as_ref());
    TrainOutcome { model, report, status: TrainStatus::Aborted { epoch: epoch + 1, reason }, active_modes }
}
