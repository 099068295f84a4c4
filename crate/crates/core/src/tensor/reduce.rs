use super::broadcast::broadcast_offsets;
use super::elem::{dispatch, gather_scaled, Elem};
use super::shape_ops::permute_values;
use super::{Tape, Tensor};
use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
}

fn reduce_values<T: Elem>(v: &[T], shape: &[usize], perm: &[usize], groups: usize, len: usize, scale: f64) -> Vec<T> {
    let moved = permute_values(v, shape, perm);
    let s = T::from_f64(scale);
    (0..groups)
        .map(|g| {
            let mut acc = T::ZERO;
            for &x in &moved[g * len..(g + 1) * len] {
                acc += x;
            }
            if scale != 1.0 {
                acc * s
            } else {
                acc
            }
        })
        .collect()
}

impl Tape {
    /// Reduces over `axes`, removing them from the shape. Each output is
    /// accumulated over the reduced elements in ascending row-major order.
    pub fn reduce(&self, op: ReduceOp, x: &Tensor, axes: &[usize]) -> Result<Tensor> {
        let rank = x.rank();
        let mut reduced = vec![false; rank];
        for &a in axes {
            if a >= rank {
                return Err(shape_err!("reduction axis {a} out of range for rank {rank}"));
            }
            if reduced[a] {
                return Err(shape_err!("reduction axes {axes:?} are not distinct"));
            }
            reduced[a] = true;
        }
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        let kept: Vec<usize> = (0..rank).filter(|&a| !reduced[a]).collect();
        let perm: Vec<usize> = kept.iter().copied().chain(sorted.iter().copied()).collect();
        let shape = x.shape().to_vec();
        let out_shape: Vec<usize> = kept.iter().map(|&a| shape[a]).collect();
        let groups: usize = out_shape.iter().product();
        let len: usize = sorted.iter().map(|&a| shape[a]).product();
        let scale = match op {
            ReduceOp::Sum => 1.0,
            ReduceOp::Mean => 1.0 / len as f64,
        };
        let data = dispatch!(x.storage(), v => Elem::wrap(reduce_values(v, &shape, &perm, groups, len, scale)));
        // gradient broadcasts back over the reduced axes
        let keep_shape: Vec<usize> = (0..rank).map(|a| if reduced[a] { 1 } else { shape[a] }).collect();
        self.record(&[x], out_shape, data, move |g, _| {
            let offsets = broadcast_offsets(&keep_shape, &shape);
            vec![Some(dispatch!(g, v => Elem::wrap(gather_scaled(v, &offsets, scale))))]
        })
    }

    pub fn sum(&self, x: &Tensor, axes: &[usize]) -> Result<Tensor> {
        self.reduce(ReduceOp::Sum, x, axes)
    }

    pub fn mean(&self, x: &Tensor, axes: &[usize]) -> Result<Tensor> {
        self.reduce(ReduceOp::Mean, x, axes)
    }

    /// Sum over every axis, producing a rank-0 scalar.
    pub fn sum_all(&self, x: &Tensor) -> Result<Tensor> {
        let axes: Vec<usize> = (0..x.rank()).collect();
        self.reduce(ReduceOp::Sum, x, &axes)
    }

    pub fn mean_all(&self, x: &Tensor) -> Result<Tensor> {
        let axes: Vec<usize> = (0..x.rank()).collect();
        self.reduce(ReduceOp::Mean, x, &axes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_and_mean() {
        let t = Tape::new();
        let v = Tensor::from_real(&[3], vec![1., 2., 3.]).unwrap();
        assert_eq!(t.sum_all(&v).unwrap().item().unwrap(), 6.0);
        let m = Tensor::from_real(&[2, 2], vec![1., 2., 3., 4.]).unwrap();
        let r = t.mean(&m, &[0]).unwrap();
        assert_eq!(r.shape(), &[2]);
        assert_eq!(r.real_values().unwrap(), &[2., 3.]);
    }

    #[test]
    fn reduced_dims_removed() {
        let t = Tape::new();
        let x = Tensor::full(&[2, 3, 4], 1.0).unwrap();
        assert_eq!(t.sum(&x, &[1]).unwrap().shape(), &[2, 4]);
        assert_eq!(t.sum(&x, &[0, 2]).unwrap().shape(), &[3]);
        assert!(t.sum(&x, &[3]).is_err());
        assert!(t.sum(&x, &[1, 1]).is_err());
    }

    #[test]
    fn mean_gradient_is_uniform() {
        let t = Tape::new();
        let x = Tensor::from_real(&[4], vec![1., 5., 2., 8.]).unwrap().requires_grad(true);
        let m = t.mean_all(&x).unwrap();
        let g = t.backward(&m).unwrap();
        assert_eq!(g.get(&x).unwrap().real_values().unwrap(), &[0.25; 4]);
    }
}
