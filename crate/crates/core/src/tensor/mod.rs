//! Dense n-dimensional tensors and reverse-mode differentiation.
//!
//! Tensors are immutable values. Arithmetic is recorded on an explicit
//! [`Tape`]; operations are methods on the tape so that every recorded node
//! belongs to exactly one tape. A tensor only enters the tape when it either
//! carries `requires_grad` (it becomes a leaf on first use) or was produced by
//! a tracked operation. Untracked inputs are treated as constants, so a
//! forward pass over untracked parameters records nothing.
//!
//! Complex gradients follow the convention `dL/dRe + i dL/dIm` for a real
//! scalar loss `L`.

mod broadcast;
mod complex;
mod contract;
mod elem;
mod ewise;
mod reduce;
mod shape_ops;
mod tape;
mod unary;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use contract::contract_values;
pub use elem::Elem;
pub use ewise::EwiseOp;
pub use reduce::ReduceOp;
pub use unary::{gelu_derivative, gelu_scalar};
pub use tape::{Gradients, Tape};

pub use shape_ops::permute_values;

use crate::error::{shape_err, Error, Result};

pub type C64 = num_complex::Complex64;

static NEXT_TENSOR_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_TENSOR_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemKind {
    Real64,
    Complex128,
}

impl fmt::Display for ElemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElemKind::Real64 => f.write_str("real64"),
            ElemKind::Complex128 => f.write_str("complex128"),
        }
    }
}

/// Flat row-major element storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl Storage {
    pub fn len(&self) -> usize {
        match self {
            Storage::Real(v) => v.len(),
            Storage::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ElemKind {
        match self {
            Storage::Real(_) => ElemKind::Real64,
            Storage::Complex(_) => ElemKind::Complex128,
        }
    }

    pub fn zeros(kind: ElemKind, len: usize) -> Storage {
        match kind {
            ElemKind::Real64 => Storage::Real(vec![0.0; len]),
            ElemKind::Complex128 => Storage::Complex(vec![C64::new(0.0, 0.0); len]),
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Storage::Real(v) => Some(v),
            Storage::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[C64]> {
        match self {
            Storage::Complex(v) => Some(v),
            Storage::Real(_) => None,
        }
    }

    pub(crate) fn real(&self) -> &[f64] {
        self.as_real().expect("real storage")
    }

    pub(crate) fn complex(&self) -> &[C64] {
        self.as_complex().expect("complex storage")
    }

    /// Elementwise `self += other`; kinds and lengths must agree.
    pub(crate) fn accumulate(&mut self, other: &Storage) {
        match (self, other) {
            (Storage::Real(a), Storage::Real(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Storage::Complex(a), Storage::Complex(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y)
            }
            _ => panic!("gradient kind mismatch during accumulation"),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Storage::Real(v) => v.iter().all(|x| x.is_finite()),
            Storage::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }
}

/// Initial contents for [`Tensor::create`].
#[derive(Debug, Clone)]
pub enum Init {
    Fill(f64),
    Values(Storage),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NodeRef {
    pub tape: u64,
    pub generation: u64,
    pub index: usize,
}

/// Immutable dense tensor, possibly tracked by a [`Tape`].
#[derive(Clone)]
pub struct Tensor {
    id: u64,
    shape: Vec<usize>,
    data: Arc<Storage>,
    requires_grad: bool,
    node: Option<NodeRef>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(shape_err!("shape must have at least one dimension"));
    }
    if let Some(d) = shape.iter().position(|&n| n == 0) {
        return Err(shape_err!("dimension {d} of shape {shape:?} is zero"));
    }
    Ok(())
}

impl Tensor {
    /// Builds a leaf tensor; no tape node is recorded.
    pub fn create(shape: &[usize], kind: ElemKind, init: Init, requires_grad: bool) -> Result<Tensor> {
        check_shape(shape)?;
        let n = numel(shape);
        let data = match init {
            Init::Fill(v) => match kind {
                ElemKind::Real64 => Storage::Real(vec![v; n]),
                ElemKind::Complex128 => Storage::Complex(vec![C64::new(v, 0.0); n]),
            },
            Init::Values(s) => {
                if s.kind() != kind {
                    return Err(Error::Kind(format!("values are {} but tensor is {kind}", s.kind())));
                }
                if s.len() != n {
                    return Err(shape_err!(
                        "{} values cannot fill shape {shape:?} ({n} elements)",
                        s.len()
                    ));
                }
                s
            }
        };
        Ok(Tensor::from_parts(shape.to_vec(), data).requires_grad(requires_grad))
    }

    pub fn new(shape: &[usize], data: Storage) -> Result<Tensor> {
        let kind = data.kind();
        Tensor::create(shape, kind, Init::Values(data), false)
    }

    pub fn from_real(shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        Tensor::new(shape, Storage::Real(values))
    }

    pub fn from_complex(shape: &[usize], values: Vec<C64>) -> Result<Tensor> {
        Tensor::new(shape, Storage::Complex(values))
    }

    pub fn zeros(shape: &[usize], kind: ElemKind) -> Result<Tensor> {
        Tensor::create(shape, kind, Init::Fill(0.0), false)
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Tensor> {
        Tensor::create(shape, ElemKind::Real64, Init::Fill(value), false)
    }

    /// Rank-0 real scalar.
    pub fn scalar(value: f64) -> Tensor {
        Tensor::from_parts(Vec::new(), Storage::Real(vec![value]))
    }

    /// Unchecked construction used by operations whose output shape is known good.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Storage) -> Tensor {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor { id: next_id(), shape, data: Arc::new(data), requires_grad: false, node: None }
    }

    pub(crate) fn tracked(shape: Vec<usize>, data: Storage, node: NodeRef) -> Tensor {
        let mut t = Tensor::from_parts(shape, data);
        t.node = Some(node);
        t
    }

    /// Marks (or unmarks) this tensor as a differentiable leaf. Returns a
    /// fresh leaf sharing the same data.
    pub fn requires_grad(self, flag: bool) -> Tensor {
        Tensor { id: next_id(), shape: self.shape, data: self.data, requires_grad: flag, node: None }
    }

    /// Same data, detached from any tape and not requiring gradients.
    pub fn detach(&self) -> Tensor {
        Tensor {
            id: next_id(),
            shape: self.shape.clone(),
            data: Arc::clone(&self.data),
            requires_grad: false,
            node: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn kind(&self) -> ElemKind {
        self.data.kind()
    }

    pub fn is_complex(&self) -> bool {
        self.kind() == ElemKind::Complex128
    }

    pub fn storage(&self) -> &Storage {
        &self.data
    }

    pub fn requires_grad_flag(&self) -> bool {
        self.requires_grad
    }

    pub(crate) fn node(&self) -> Option<NodeRef> {
        self.node
    }

    pub fn is_tracked(&self) -> bool {
        self.requires_grad || self.node.is_some()
    }

    pub fn real_values(&self) -> Result<&[f64]> {
        self.data
            .as_real()
            .ok_or_else(|| Error::Kind("expected a real tensor, found complex".into()))
    }

    pub fn complex_values(&self) -> Result<&[C64]> {
        self.data
            .as_complex()
            .ok_or_else(|| Error::Kind("expected a complex tensor, found real".into()))
    }

    pub fn to_real_vec(&self) -> Result<Vec<f64>> {
        self.real_values().map(|v| v.to_vec())
    }

    /// Value of a single-element real tensor.
    pub fn item(&self) -> Result<f64> {
        let v = self.real_values()?;
        if v.len() != 1 {
            return Err(shape_err!("item() on tensor of shape {:?}", self.shape));
        }
        Ok(v[0])
    }

    /// Element at a multi-index (real tensors).
    pub fn at(&self, index: &[usize]) -> Result<f64> {
        let off = self.offset_of(index)?;
        Ok(self.real_values()?[off])
    }

    pub fn offset_of(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(shape_err!("index {index:?} does not match rank {}", self.shape.len()));
        }
        let mut off = 0;
        for (i, (&ix, &n)) in index.iter().zip(&self.shape).enumerate() {
            if ix >= n {
                return Err(shape_err!("index {ix} out of bounds for axis {i} of size {n}"));
            }
            off = off * n + ix;
        }
        Ok(off)
    }

    /// Untracked reshape sharing storage.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape(shape)?;
        if numel(shape) != self.numel() {
            return Err(shape_err!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        Ok(Tensor {
            id: next_id(),
            shape: shape.to_vec(),
            data: Arc::clone(&self.data),
            requires_grad: false,
            node: None,
        })
    }

    /// Bitwise equality of shape and contents.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        if self.shape != other.shape {
            return false;
        }
        match (&*self.data, &*other.data) {
            (Storage::Real(a), Storage::Real(b)) => {
                a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Storage::Complex(a), Storage::Complex(b)) => a
                .iter()
                .zip(b)
                .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()),
            _ => false,
        }
    }

    /// Largest absolute elementwise difference (kinds must agree).
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(shape_err!("shapes {:?} and {:?} differ", self.shape, other.shape));
        }
        match (&*self.data, &*other.data) {
            (Storage::Real(a), Storage::Real(b)) => {
                Ok(a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
            }
            (Storage::Complex(a), Storage::Complex(b)) => {
                Ok(a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm())))
            }
            _ => Err(Error::Kind("cannot compare real and complex tensors".into())),
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview = 6.min(self.numel());
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.shape).field("kind", &self.kind());
        match &*self.data {
            Storage::Real(v) => s.field("head", &&v[..preview]),
            Storage::Complex(v) => s.field("head", &&v[..preview]),
        };
        s.field("requires_grad", &self.requires_grad).finish()
    }
}

/// Row-major strides for a shape.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}
