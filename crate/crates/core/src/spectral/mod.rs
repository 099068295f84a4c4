//! Real FFTs, Fourier mode truncation and spectral convolution layers.

mod conv;
pub mod fft;
mod modes;
mod real;
mod weights;

pub use conv::{spectral_conv, spectral_conv_dense, weight_mask, ConvOptions};
pub use modes::{active_mask, corner_index, corner_offsets, ModeSpec};
pub use real::{half_len, irfftn_values, rfftn_values, self_conjugate, spectrum_dims};
pub use weights::{dense_shape, tucker_mode_mix_values, tucker_ranks, Factorization, SpectralWeights, WeightData};
