//! Function-space losses, Adam with step decay, incremental Fourier modes
//! and the training loop.

mod loss;
mod optim;
mod report;
mod trainer;

pub use loss::{h1_loss, h1_per_sample, h1_weights, relative_lp_loss, relative_lp_per_sample, LossSpec};
pub use optim::{incremental_modes, Adam, IncrementalModes, StepLr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use report::{resolution_label, EpochRecord, TrainReport};
pub use trainer::{
    effective_active, evaluate, evaluate_per_sample, mean_metric, predict, select_samples, train, TrainConfig,
    TrainOutcome, TrainStatus, ValidationSet, EVAL_BATCH,
};
