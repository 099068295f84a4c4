use super::{numel, strides};
use crate::error::{shape_err, Result};

/// Result shape of broadcasting two same-rank shapes (dims equal or 1).
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(shape_err!("cannot broadcast rank {} with rank {} ({a:?} vs {b:?})", a.len(), b.len()));
    }
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (&x, &y))| match (x, y) {
            _ if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            _ => Err(shape_err!("axis {i}: sizes {x} and {y} are not broadcast-compatible")),
        })
        .collect()
}

/// For every element of `out_shape` (row-major), the offset of the source
/// element in a tensor of shape `in_shape` broadcast to `out_shape`.
pub(crate) fn broadcast_offsets(in_shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let n = numel(out_shape);
    let rank = out_shape.len();
    let in_strides = strides(in_shape);
    let eff: Vec<usize> = (0..rank).map(|i| if in_shape[i] == 1 { 0 } else { in_strides[i] }).collect();
    let mut offsets = Vec::with_capacity(n);
    if rank == 0 {
        offsets.push(0);
        return offsets;
    }
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    let inner = out_shape[rank - 1];
    let inner_stride = eff[rank - 1];
    while offsets.len() < n {
        for k in 0..inner {
            offsets.push(off + k * inner_stride);
        }
        // advance the outer odometer
        let mut ax = rank - 1;
        loop {
            if ax == 0 {
                break;
            }
            ax -= 1;
            idx[ax] += 1;
            off += eff[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= eff[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    offsets
}
