use super::search::NeighborIndex;
use crate::error::{shape_err, Error, Result};
use crate::tensor::{Storage, Tape, Tensor};

/// Function sample on an irregular point set.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub coords: Tensor,
    pub features: Tensor,
}

impl PointCloud {
    pub fn new(coords: Tensor, features: Tensor) -> Result<PointCloud> {
        if coords.rank() != 2 || features.rank() != 2 {
            return Err(shape_err!(
                "point cloud needs coords [N, d] and features [N, C], got {:?} and {:?}",
                coords.shape(),
                features.shape()
            ));
        }
        if coords.shape()[0] != features.shape()[0] {
            return Err(shape_err!(
                "{} coordinates but {} feature rows",
                coords.shape()[0],
                features.shape()[0]
            ));
        }
        if coords.real_values()?.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("point coordinates".into()));
        }
        features.real_values()?;
        Ok(PointCloud { coords, features })
    }

    pub fn len(&self) -> usize {
        self.coords.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.features.shape()[1]
    }
}

/// Matrix-valued kernel `kappa(x, y)` evaluated on concatenated pairs.
pub trait Kernel {
    fn in_channels(&self) -> usize;
    fn out_channels(&self) -> usize;
    /// Maps pairs `[E, 2d]` to flattened matrices `[E, C_out * C_in]`
    /// (row-major `C_out x C_in`).
    fn evaluate(&self, tape: &Tape, pairs: &Tensor) -> Result<Tensor>;
}

/// Kernel given by a plain function of `(x, y)`; not trainable.
pub struct FnKernel<F> {
    pub c_in: usize,
    pub c_out: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &[f64]) -> Vec<f64>> Kernel for FnKernel<F> {
    fn in_channels(&self) -> usize {
        self.c_in
    }

    fn out_channels(&self) -> usize {
        self.c_out
    }

    fn evaluate(&self, _tape: &Tape, pairs: &Tensor) -> Result<Tensor> {
        let (e, w) = (pairs.shape()[0], pairs.shape()[1]);
        let d = w / 2;
        let p = pairs.real_values()?;
        let mut out = Vec::with_capacity(e * self.c_in * self.c_out);
        for row in p.chunks_exact(w) {
            let m = (self.f)(&row[..d], &row[d..]);
            if m.len() != self.c_in * self.c_out {
                return Err(shape_err!("kernel returned {} values, expected {}", m.len(), self.c_in * self.c_out));
            }
            out.extend(m);
        }
        Tensor::from_real(&[e, self.c_out * self.c_in], out)
    }
}

impl Tape {
    /// Rows `x[idx[e], :]` of a real matrix; backward scatters-adds.
    pub fn gather_rows(&self, x: &Tensor, idx: &[usize]) -> Result<Tensor> {
        let v = x.real_values()?;
        if x.rank() != 2 {
            return Err(shape_err!("gather_rows expects a matrix, got {:?}", x.shape()));
        }
        let (n, c) = (x.shape()[0], x.shape()[1]);
        if let Some(&j) = idx.iter().find(|&&j| j >= n) {
            return Err(shape_err!("row {j} out of range for {n} rows"));
        }
        if idx.is_empty() {
            return Err(shape_err!("gather_rows with no indices"));
        }
        let mut out = Vec::with_capacity(idx.len() * c);
        for &j in idx {
            out.extend_from_slice(&v[j * c..(j + 1) * c]);
        }
        let idx = idx.to_vec();
        self.record(&[x], vec![idx.len(), c], Storage::Real(out), move |g, _| {
            let g = g.real();
            let mut gx = vec![0.0; n * c];
            for (e, &j) in idx.iter().enumerate() {
                for (a, b) in gx[j * c..(j + 1) * c].iter_mut().zip(&g[e * c..(e + 1) * c]) {
                    *a += b;
                }
            }
            vec![Some(Storage::Real(gx))]
        })
    }

    /// Mean of consecutive row segments `[offsets[i], offsets[i+1])` of a
    /// real matrix, summed in row order; empty segments give zero rows.
    pub fn segment_mean(&self, x: &Tensor, offsets: &[usize]) -> Result<Tensor> {
        let v = x.real_values()?;
        if x.rank() != 2 || offsets.last() != Some(&x.shape()[0]) {
            return Err(shape_err!("segment offsets do not cover {:?}", x.shape()));
        }
        let c = x.shape()[1];
        let nseg = offsets.len() - 1;
        let mut out = vec![0.0; nseg * c];
        for s in 0..nseg {
            let (a, b) = (offsets[s], offsets[s + 1]);
            if a == b {
                continue;
            }
            let row = &mut out[s * c..(s + 1) * c];
            for e in a..b {
                for (r, &xv) in row.iter_mut().zip(&v[e * c..(e + 1) * c]) {
                    *r += xv;
                }
            }
            let inv = 1.0 / (b - a) as f64;
            row.iter_mut().for_each(|r| *r *= inv);
        }
        let offsets = offsets.to_vec();
        let rows = x.shape()[0];
        self.record(&[x], vec![nseg, c], Storage::Real(out), move |g, _| {
            let g = g.real();
            let mut gx = vec![0.0; rows * c];
            for s in 0..nseg {
                let (a, b) = (offsets[s], offsets[s + 1]);
                if a == b {
                    continue;
                }
                let inv = 1.0 / (b - a) as f64;
                for e in a..b {
                    for (r, &gv) in gx[e * c..(e + 1) * c].iter_mut().zip(&g[s * c..(s + 1) * c]) {
                        *r = gv * inv;
                    }
                }
            }
            vec![Some(Storage::Real(gx))]
        })
    }
}

/// Result of a kernel integral.
#[derive(Debug, Clone)]
pub struct IntegralOutput {
    pub features: Tensor,
    /// Queries without any neighbor (their rows are zero).
    pub isolated: usize,
}

/// `out(x_i) = mean_{j in N(x_i)} kappa(x_i, y_j) v(y_j)`.
pub fn kernel_integral(
    tape: &Tape,
    queries: &Tensor,
    sources: &PointCloud,
    index: &NeighborIndex,
    kernel: &dyn Kernel,
) -> Result<IntegralOutput> {
    if queries.rank() != 2 || queries.shape()[1] != sources.dim() {
        return Err(shape_err!(
            "queries {:?} do not match source dimension {}",
            queries.shape(),
            sources.dim()
        ));
    }
    let nq = queries.shape()[0];
    index.validate(nq, sources.len())?;
    let (ci, co) = (kernel.in_channels(), kernel.out_channels());
    if sources.channels() != ci {
        return Err(shape_err!("sources carry {} channels, kernel expects {ci}", sources.channels()));
    }
    let isolated = index.isolated();
    if index.indices.is_empty() {
        return Ok(IntegralOutput { features: Tensor::zeros(&[nq, co], crate::tensor::ElemKind::Real64)?, isolated });
    }
    let e = index.indices.len();
    let xq = tape.gather_rows(&queries.detach(), &index.edge_queries())?;
    let ys = tape.gather_rows(&sources.coords.detach(), &index.indices)?;
    let pairs = tape.concat(&[&xq, &ys], 1)?;
    let k = kernel.evaluate(tape, &pairs)?;
    if k.shape() != [e, co * ci] {
        return Err(shape_err!("kernel output {:?}, expected [{e}, {}]", k.shape(), co * ci));
    }
    let k = tape.reshape(&k, &[e, co, ci])?;
    let v = tape.gather_rows(&sources.features, &index.indices)?;
    let v = tape.reshape(&v, &[e, 1, ci])?;
    let kv = tape.sum(&tape.mul(&k, &v)?, &[2])?;
    let features = tape.segment_mean(&kv, &index.offsets)?;
    Ok(IntegralOutput { features, isolated })
}
