use crate::error::{shape_err, Error, Result};
use crate::models::GridFunction;
use crate::tensor::Tensor;

/// Keeps every `factor`-th point along the trailing `d` axes of a real
/// tensor (indices `0, factor, 2 factor, ..`).
pub fn subsample_tensor(x: &Tensor, d: usize, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::Invalid("subsampling factor must be at least 1".into()));
    }
    if d == 0 || d > x.rank() {
        return Err(shape_err!("cannot subsample {d} trailing axes of shape {:?}", x.shape()));
    }
    let shape = x.shape();
    let lead: usize = shape[..shape.len() - d].iter().product();
    let sizes = &shape[shape.len() - d..];
    if let Some(k) = sizes.iter().position(|&n| n % factor != 0) {
        return Err(Error::Invalid(format!("factor {factor} does not divide axis {k} of size {}", sizes[k])));
    }
    if factor == 1 {
        return Ok(x.detach());
    }
    let values = x.real_values()?;
    let coarse: Vec<usize> = sizes.iter().map(|&n| n / factor).collect();
    let fine_len: usize = sizes.iter().product();
    let coarse_len: usize = coarse.iter().product();
    let mut out = Vec::with_capacity(lead * coarse_len);
    for b in 0..lead {
        for flat in 0..coarse_len {
            let mut rem = flat;
            let mut src = 0;
            let mut stride = 1;
            for k in (0..d).rev() {
                let i = rem % coarse[k];
                rem /= coarse[k];
                src += i * factor * stride;
                stride *= sizes[k];
            }
            out.push(values[b * fine_len + src]);
        }
    }
    let mut new_shape = shape[..shape.len() - d].to_vec();
    new_shape.extend_from_slice(&coarse);
    Tensor::from_real(&new_shape, out)
}

/// Strided subsampling of a grid function; bounds are unchanged.
pub fn subsample(g: &GridFunction, factor: usize) -> Result<GridFunction> {
    GridFunction::new(subsample_tensor(&g.data, g.dim(), factor)?, g.bounds.clone())
}

/// Subsamples `[B, C, n..]` data to the given spatial sizes, which must be
/// obtainable with one common integer factor.
pub fn subsample_to(x: &Tensor, sizes: &[usize]) -> Result<Tensor> {
    let d = sizes.len();
    if x.rank() != d + 2 {
        return Err(shape_err!("expected [B, C, {d} spatial axes], got {:?}", x.shape()));
    }
    let have = &x.shape()[2..];
    let factor = if sizes[0] > 0 && have[0].is_multiple_of(sizes[0]) { have[0] / sizes[0] } else { 0 };
    if factor == 0 || have.iter().zip(sizes).any(|(&h, &s)| h != s * factor) {
        return Err(Error::Invalid(format!("resolution {sizes:?} is not a subsampling of {have:?}")));
    }
    subsample_tensor(x, d, factor)
}
