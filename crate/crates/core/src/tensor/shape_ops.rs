use super::elem::{dispatch, Elem};
use super::{numel, strides, ElemKind, Storage, Tape, Tensor, C64};
use crate::error::{shape_err, Error, Result};

/// Copies the box `extent` starting at `src_origin` in `src` to `dst_origin` in `dst`.
fn copy_box<T: Copy>(
    src: &[T],
    src_shape: &[usize],
    src_origin: &[usize],
    dst: &mut [T],
    dst_shape: &[usize],
    dst_origin: &[usize],
    extent: &[usize],
) {
    let rank = extent.len();
    if rank == 0 || extent.contains(&0) {
        if rank == 0 {
            dst[0] = src[0];
        }
        return;
    }
    let ss = strides(src_shape);
    let ds = strides(dst_shape);
    let inner = extent[rank - 1];
    let mut idx = vec![0usize; rank];
    loop {
        let mut so = 0;
        let mut doff = 0;
        for a in 0..rank {
            so += (src_origin[a] + idx[a]) * ss[a];
            doff += (dst_origin[a] + idx[a]) * ds[a];
        }
        dst[doff..doff + inner].copy_from_slice(&src[so..so + inner]);
        let mut a = rank - 1;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < extent[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Row-major transpose of `data` (shape `shape`) by axis permutation `perm`.
pub fn permute_values<T: Copy>(data: &[T], shape: &[usize], perm: &[usize]) -> Vec<T> {
    let rank = shape.len();
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return data.to_vec();
    }
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let inner = out_shape[rank - 1];
    let inner_stride = src_strides[rank - 1];
    let mut idx = vec![0usize; rank];
    let mut base = 0usize;
    while out.len() < n {
        if inner_stride == 1 {
            out.extend_from_slice(&data[base..base + inner]);
        } else {
            out.extend((0..inner).map(|k| data[base + k * inner_stride]));
        }
        let mut a = rank - 1;
        loop {
            if a == 0 {
                break;
            }
            a -= 1;
            idx[a] += 1;
            base += src_strides[a];
            if idx[a] < out_shape[a] {
                break;
            }
            base -= src_strides[a] * idx[a];
            idx[a] = 0;
        }
    }
    out
}

fn check_perm(perm: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    if perm.len() != rank {
        return Err(shape_err!("permutation {perm:?} has wrong length for rank {rank}"));
    }
    for &p in perm {
        if p >= rank || seen[p] {
            return Err(shape_err!("{perm:?} is not a permutation of 0..{rank}"));
        }
        seen[p] = true;
    }
    Ok(())
}

fn slice_storage(s: &Storage, shape: &[usize], ranges: &[(usize, usize)]) -> (Vec<usize>, Storage) {
    let extent: Vec<usize> = ranges.iter().map(|&(a, b)| b - a).collect();
    let origin: Vec<usize> = ranges.iter().map(|&(a, _)| a).collect();
    let zero = vec![0; shape.len()];
    let n = numel(&extent);
    let data = dispatch!(s, v => {
        let mut out = vec![Elem::ZERO; n];
        copy_box(v, shape, &origin, &mut out, &extent, &zero, &extent);
        Elem::wrap(out)
    });
    (extent, data)
}

/// Places `s` (shape `shape`) inside a `fill`-valued tensor of `out_shape` at `origin`.
fn embed_storage(s: &Storage, shape: &[usize], out_shape: &[usize], origin: &[usize], fill: f64) -> Storage {
    let zero = vec![0; shape.len()];
    let n = numel(out_shape);
    dispatch!(s, v => {
        let mut out = vec![Elem::from_f64(fill); n];
        copy_box(v, shape, &zero, &mut out, out_shape, origin, shape);
        Elem::wrap(out)
    })
}

impl Tape {
    pub fn reshape(&self, x: &Tensor, shape: &[usize]) -> Result<Tensor> {
        if shape.contains(&0) || numel(shape) != x.numel() {
            return Err(shape_err!("cannot reshape {:?} into {shape:?}", x.shape()));
        }
        // Storage is shared; the gradient is already laid out row-major.
        self.record(&[x], shape.to_vec(), x.storage().clone(), |g, _| vec![Some(g.clone())])
    }

    pub fn permute(&self, x: &Tensor, perm: &[usize]) -> Result<Tensor> {
        check_perm(perm, x.rank())?;
        let shape = x.shape().to_vec();
        let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let data = dispatch!(x.storage(), v => Elem::wrap(permute_values(v, &shape, perm)));
        let mut inverse = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let out_shape2 = out_shape.clone();
        self.record(&[x], out_shape, data, move |g, _| {
            vec![Some(dispatch!(g, v => Elem::wrap(permute_values(v, &out_shape2, &inverse))))]
        })
    }

    /// Half-open ranges per axis.
    pub fn slice(&self, x: &Tensor, ranges: &[(usize, usize)]) -> Result<Tensor> {
        if ranges.len() != x.rank() {
            return Err(shape_err!("slice needs {} ranges, got {}", x.rank(), ranges.len()));
        }
        for (a, (&(s, e), &n)) in ranges.iter().zip(x.shape()).enumerate() {
            if s >= e || e > n {
                return Err(shape_err!("slice range {s}..{e} invalid for axis {a} of size {n}"));
            }
        }
        let in_shape = x.shape().to_vec();
        let (out_shape, data) = slice_storage(x.storage(), &in_shape, ranges);
        let origin: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        let out_shape2 = out_shape.clone();
        self.record(&[x], out_shape, data, move |g, _| {
            vec![Some(embed_storage(g, &out_shape2, &in_shape, &origin, 0.0))]
        })
    }

    /// Convenience: slice along a single axis.
    pub fn narrow(&self, x: &Tensor, axis: usize, start: usize, end: usize) -> Result<Tensor> {
        let mut ranges: Vec<(usize, usize)> = x.shape().iter().map(|&n| (0, n)).collect();
        if axis >= ranges.len() {
            return Err(shape_err!("axis {axis} out of range"));
        }
        ranges[axis] = (start, end);
        self.slice(x, &ranges)
    }

    pub fn concat(&self, xs: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = xs.first().ok_or_else(|| shape_err!("concat of zero tensors"))?;
        if axis >= first.rank() {
            return Err(shape_err!("concat axis {axis} out of range for rank {}", first.rank()));
        }
        let kind = first.kind();
        let mut out_shape = first.shape().to_vec();
        out_shape[axis] = 0;
        for t in xs {
            if t.kind() != kind {
                return Err(Error::Kind("concat of mixed element kinds".into()));
            }
            if t.rank() != first.rank()
                || t.shape().iter().zip(first.shape()).enumerate().any(|(a, (p, q))| a != axis && p != q)
            {
                return Err(shape_err!("concat shapes {:?} and {:?} disagree off axis {axis}", t.shape(), first.shape()));
            }
            out_shape[axis] += t.shape()[axis];
        }
        fn gather<T: Elem>(xs: &[&Tensor], axis: usize, out_shape: &[usize]) -> (Vec<T>, Vec<usize>) {
            let mut out = vec![T::ZERO; numel(out_shape)];
            let mut offsets = Vec::with_capacity(xs.len());
            let zero = vec![0; out_shape.len()];
            let mut at = 0;
            for t in xs {
                let mut origin = zero.clone();
                origin[axis] = at;
                copy_box(T::unwrap(t.storage()), t.shape(), &zero, &mut out, out_shape, &origin, t.shape());
                offsets.push(at);
                at += t.shape()[axis];
            }
            (out, offsets)
        }
        let (data, offsets) = match kind {
            ElemKind::Real64 => {
                let (v, o) = gather::<f64>(xs, axis, &out_shape);
                (Storage::Real(v), o)
            }
            ElemKind::Complex128 => {
                let (v, o) = gather::<C64>(xs, axis, &out_shape);
                (Storage::Complex(v), o)
            }
        };
        let parts: Vec<Vec<usize>> = xs.iter().map(|t| t.shape().to_vec()).collect();
        let full = out_shape.clone();
        self.record(xs, out_shape, data, move |g, needs| {
            parts
                .iter()
                .zip(&offsets)
                .zip(needs)
                .map(|((shape, &off), &need)| {
                    need.then(|| {
                        let ranges: Vec<(usize, usize)> = full
                            .iter()
                            .enumerate()
                            .map(|(a, &n)| if a == axis { (off, off + shape[axis]) } else { (0, n) })
                            .collect();
                        slice_storage(g, &full, &ranges).1
                    })
                })
                .collect()
        })
    }

    /// Pads each axis with `pads[axis] = (before, after)` copies of `value`.
    pub fn constant_pad(&self, x: &Tensor, pads: &[(usize, usize)], value: f64) -> Result<Tensor> {
        if pads.len() != x.rank() {
            return Err(shape_err!("pad needs {} pairs, got {}", x.rank(), pads.len()));
        }
        let in_shape = x.shape().to_vec();
        let out_shape: Vec<usize> = in_shape.iter().zip(pads).map(|(&n, &(l, r))| n + l + r).collect();
        let origin: Vec<usize> = pads.iter().map(|p| p.0).collect();
        let data = embed_storage(x.storage(), &in_shape, &out_shape, &origin, value);
        let full = out_shape.clone();
        self.record(&[x], out_shape, data, move |g, _| {
            let ranges: Vec<(usize, usize)> =
                origin.iter().zip(&in_shape).map(|(&o, &n)| (o, o + n)).collect();
            vec![Some(slice_storage(g, &full, &ranges).1)]
        })
    }
}
