use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Compressed neighbor lists: sources of query `i` are
/// `indices[offsets[i]..offsets[i + 1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    pub offsets: Vec<usize>,
    pub indices: Vec<usize>,
    pub radius: f64,
}

impl NeighborIndex {
    pub fn queries(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of queries with an empty neighborhood.
    pub fn isolated(&self) -> usize {
        self.offsets.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Query index of every edge, in list order.
    pub fn edge_queries(&self) -> Vec<usize> {
        (0..self.queries()).flat_map(|i| std::iter::repeat_n(i, self.offsets[i + 1] - self.offsets[i])).collect()
    }

    pub fn validate(&self, n_queries: usize, n_sources: usize) -> Result<()> {
        if self.offsets.len() != n_queries + 1 || self.offsets[0] != 0 {
            return Err(shape_err!(
                "neighbor index covers {} queries, cloud has {n_queries}",
                self.queries()
            ));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) || *self.offsets.last().unwrap() != self.indices.len() {
            return Err(Error::Invalid("neighbor offsets are not a prefix array".into()));
        }
        if let Some(&j) = self.indices.iter().find(|&&j| j >= n_sources) {
            return Err(shape_err!("neighbor index {j} out of range for {n_sources} sources"));
        }
        Ok(())
    }
}

fn coords(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(shape_err!("{what} coordinates must be [N, d], got {:?}", t.shape()));
    }
    let v = t.real_values()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{what} coordinates")));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

/// Exact brute-force radius search (`||x_i - y_j|| <= r`). Each neighbor list
/// is ordered lexicographically by source coordinates (ties by index), so
/// reordering the sources does not change downstream summation order.
pub fn radius_search(queries: &Tensor, sources: &Tensor, r: f64) -> Result<NeighborIndex> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Invalid(format!("search radius must be positive, got {r}")));
    }
    let (nq, d) = coords(queries, "query")?;
    let (ns, ds) = coords(sources, "source")?;
    if d != ds {
        return Err(shape_err!("query dimension {d} differs from source dimension {ds}"));
    }
    let (q, s) = (queries.real_values()?, sources.real_values()?);
    let r2 = r * r;
    let mut offsets = Vec::with_capacity(nq + 1);
    let mut indices = Vec::new();
    offsets.push(0);
    for i in 0..nq {
        let qi = &q[i * d..(i + 1) * d];
        let start = indices.len();
        for j in 0..ns {
            let dist2: f64 = qi.iter().zip(&s[j * d..(j + 1) * d]).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2 <= r2 {
                indices.push(j);
            }
        }
        let point = |j: usize| &s[j * d..(j + 1) * d];
        indices[start..].sort_by(|&a, &b| {
            point(a).iter().zip(point(b)).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(a.cmp(&b))
        });
        offsets.push(indices.len());
    }
    Ok(NeighborIndex { offsets, indices, radius: r })
}
