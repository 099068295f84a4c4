//! Synthetic PDE datasets, resolution subsampling and normalization.

mod burgers;
mod darcy;
mod dataset;
mod grf;
mod normalize;
mod subsample;

pub use burgers::{solve_burgers, solve_burgers_observed, spectral_upsample};
pub use darcy::{
    darcy_coefficient, manufactured_error, solve_darcy, DarcySolution, CG_TOLERANCE, DEFAULT_A_HI, DEFAULT_A_LO,
};
pub use dataset::{
    generate_dataset, generate_sample, generate_samples, DatasetFile, DatasetKind, GeneratorParams, BURGERS_GRF,
    DARCY_GRF, DATASET_MAGIC,
};
pub use grf::{grf_point_variance, sample_grf, sample_grf_1d, sample_grf_2d, signed_frequency, GrfSpec};
pub use normalize::{DataProcessor, Normalizer, ProcessorFlags, NORMALIZER_EPS};
pub use subsample::{subsample, subsample_tensor, subsample_to};
