//! Neural operators on function-valued data.
//!
//! The crate bundles everything needed to train Fourier (FNO), tensorized
//! Fourier (TFNO) and graph (GNO) neural operators: a reverse-mode autodiff
//! tape ([`tensor`]), real FFTs and spectral convolutions ([`spectral`]),
//! kernel integrals on point clouds ([`graph`]), model assembly and
//! checkpoints ([`models`]), synthetic PDE datasets ([`data`]) and the
//! training loop ([`training`]).

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod format;
pub mod graph;
pub mod models;
pub mod rng;
pub mod spectral;
pub mod tensor;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{ElemKind, Init, Storage, Tape, Tensor, C64};
