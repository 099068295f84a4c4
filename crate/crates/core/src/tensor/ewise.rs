use super::broadcast::{broadcast_offsets, broadcast_shape};
use super::elem::{dispatch, scaled, Elem};
use super::{numel, Storage, Tape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwiseOp {
    Add,
    Sub,
    Mul,
}

fn apply<T: Elem>(op: EwiseOp, x: T, y: T) -> T {
    match op {
        EwiseOp::Add => x + y,
        EwiseOp::Sub => x - y,
        EwiseOp::Mul => x * y,
    }
}

fn forward<T: Elem>(op: EwiseOp, a: &[T], b: &[T], oa: Option<&[usize]>, ob: Option<&[usize]>, n: usize) -> Vec<T> {
    match (oa, ob) {
        (None, None) => a.iter().zip(b).map(|(&x, &y)| apply(op, x, y)).collect(),
        _ => (0..n)
            .map(|i| {
                let x = a[oa.map_or(i, |o| o[i])];
                let y = b[ob.map_or(i, |o| o[i])];
                apply(op, x, y)
            })
            .collect(),
    }
}

/// Sums `g` (output-shaped) into a buffer of length `len` through `offsets`.
fn reduce_into<T: Elem>(g: &[T], offsets: Option<&[usize]>, len: usize, factor: impl Fn(usize) -> T) -> Vec<T> {
    match offsets {
        None => g.iter().enumerate().map(|(i, &v)| v * factor(i)).collect(),
        Some(o) => {
            let mut acc = vec![T::ZERO; len];
            for (i, &v) in g.iter().enumerate() {
                acc[o[i]] += v * factor(i);
            }
            acc
        }
    }
}

impl Tape {
    pub fn ewise(&self, op: EwiseOp, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.kind() != b.kind() {
            return Err(Error::Kind(format!(
                "elementwise {op:?} between {} and {} tensors",
                a.kind(),
                b.kind()
            )));
        }
        let out_shape = broadcast_shape(a.shape(), b.shape())?;
        let n = numel(&out_shape);
        let oa = (a.shape() != out_shape.as_slice()).then(|| broadcast_offsets(a.shape(), &out_shape));
        let ob = (b.shape() != out_shape.as_slice()).then(|| broadcast_offsets(b.shape(), &out_shape));
        let data = match (a.storage(), b.storage()) {
            (Storage::Real(x), Storage::Real(y)) => {
                Storage::Real(forward(op, x, y, oa.as_deref(), ob.as_deref(), n))
            }
            (Storage::Complex(x), Storage::Complex(y)) => {
                Storage::Complex(forward(op, x, y, oa.as_deref(), ob.as_deref(), n))
            }
            _ => unreachable!(),
        };
        if !self.tracking(&[a, b]) {
            return Ok(Tensor::from_parts(out_shape, data));
        }
        let (ac, bc) = (a.clone(), b.clone());
        let (la, lb) = (a.numel(), b.numel());
        self.record(&[a, b], out_shape, data, move |g, needs| {
            fn grads<T: Elem>(
                op: EwiseOp,
                g: &[T],
                a: &[T],
                b: &[T],
                oa: Option<&[usize]>,
                ob: Option<&[usize]>,
                la: usize,
                lb: usize,
                needs: &[bool],
            ) -> Vec<Option<Storage>> {
                let ga = needs[0].then(|| match op {
                    EwiseOp::Add | EwiseOp::Sub => reduce_into(g, oa, la, |_| T::ONE),
                    EwiseOp::Mul => reduce_into(g, oa, la, |i| b[ob.map_or(i, |o| o[i])].conj()),
                });
                let gb = needs[1].then(|| match op {
                    EwiseOp::Add => reduce_into(g, ob, lb, |_| T::ONE),
                    EwiseOp::Sub => reduce_into(g, ob, lb, |_| -T::ONE),
                    EwiseOp::Mul => reduce_into(g, ob, lb, |i| a[oa.map_or(i, |o| o[i])].conj()),
                });
                vec![ga.map(T::wrap), gb.map(T::wrap)]
            }
            match (g, ac.storage(), bc.storage()) {
                (Storage::Real(g), Storage::Real(x), Storage::Real(y)) => {
                    grads(op, g, x, y, oa.as_deref(), ob.as_deref(), la, lb, needs)
                }
                (Storage::Complex(g), Storage::Complex(x), Storage::Complex(y)) => {
                    grads(op, g, x, y, oa.as_deref(), ob.as_deref(), la, lb, needs)
                }
                _ => unreachable!("gradient kind mismatch"),
            }
        })
    }

    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.ewise(EwiseOp::Add, a, b)
    }

    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.ewise(EwiseOp::Sub, a, b)
    }

    pub fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.ewise(EwiseOp::Mul, a, b)
    }

    /// Multiplication by a real constant (real or complex tensors).
    pub fn scale(&self, x: &Tensor, c: f64) -> Result<Tensor> {
        let data = dispatch!(x.storage(), v => Elem::wrap(scaled(v, c)));
        self.record(&[x], x.shape().to_vec(), data, move |g, _| {
            vec![Some(dispatch!(g, v => Elem::wrap(scaled(v, c))))]
        })
    }

    /// Adds a real constant to every element of a real tensor.
    pub fn add_scalar(&self, x: &Tensor, c: f64) -> Result<Tensor> {
        let v = x.real_values()?;
        let data = Storage::Real(v.iter().map(|e| e + c).collect());
        self.record(&[x], x.shape().to_vec(), data, |g, _| vec![Some(g.clone())])
    }
}
