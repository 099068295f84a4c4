use crate::error::{shape_err, Error, Result};
use crate::tensor::{Tape, Tensor};

/// Batched channel-first samples `[B, C, n_1.., n_d]` on the endpoint-exclusive
/// uniform grid: point `i` of axis `k` sits at `low_k + i (high_k - low_k) / n_k`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub data: Tensor,
    pub bounds: Vec<(f64, f64)>,
}

impl GridFunction {
    pub fn new(data: Tensor, bounds: Vec<(f64, f64)>) -> Result<GridFunction> {
        let d = bounds.len();
        if !(1..=2).contains(&d) {
            return Err(Error::Invalid(format!("grid functions are 1-D or 2-D, got {d} bounds")));
        }
        if data.rank() != d + 2 {
            return Err(shape_err!("data of shape {:?} is not [B, C, {d} spatial axes]", data.shape()));
        }
        if let Some(k) = data.shape()[2..].iter().position(|&n| n < 2) {
            return Err(shape_err!("spatial axis {k} needs at least 2 points"));
        }
        if let Some(k) = bounds.iter().position(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Invalid(format!("bounds of axis {k} are not increasing")));
        }
        data.real_values()?;
        Ok(GridFunction { data, bounds })
    }

    /// Unit-box bounds for a tensor with `d` spatial axes.
    pub fn unit(data: Tensor, d: usize) -> Result<GridFunction> {
        GridFunction::new(data, vec![(0.0, 1.0); d])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.data.shape()[2..]
    }

    /// Physical coordinates of grid point `i` along axis `k`.
    pub fn coordinate(&self, k: usize, i: usize) -> f64 {
        let (lo, hi) = self.bounds[k];
        lo + i as f64 * (hi - lo) / self.sizes()[k] as f64
    }
}

/// Normalized coordinate channels `[d, n_1.., n_d]` holding `i_k / n_k`.
pub fn coordinate_channels(sizes: &[usize]) -> Result<Tensor> {
    let d = sizes.len();
    let total: usize = sizes.iter().product();
    let mut v = vec![0.0; d * total];
    for flat in 0..total {
        let mut rem = flat;
        for k in (0..d).rev() {
            let i = rem % sizes[k];
            rem /= sizes[k];
            v[k * total + flat] = i as f64 / sizes[k] as f64;
        }
    }
    let mut shape = vec![d];
    shape.extend_from_slice(sizes);
    Tensor::from_real(&shape, v)
}

/// Appends `d` channels of normalized grid coordinates in `[0, 1)`.
pub fn grid_embedding(tape: &Tape, x: &Tensor, d: usize) -> Result<Tensor> {
    if x.rank() != d + 2 {
        return Err(shape_err!("expected [B, C, {d} spatial axes], got {:?}", x.shape()));
    }
    let b = x.shape()[0];
    let coords = coordinate_channels(&x.shape()[2..])?;
    let one = coords.numel();
    let mut v = Vec::with_capacity(b * one);
    for _ in 0..b {
        v.extend_from_slice(coords.real_values()?);
    }
    let mut shape = vec![b];
    shape.extend_from_slice(coords.shape());
    let emb = Tensor::from_real(&shape, v)?;
    tape.concat(&[x, &emb], 1)
}

/// Original spatial sizes and the high-side pads applied to them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadRecord {
    pub sizes: Vec<usize>,
    pub pads: Vec<usize>,
}

impl PadRecord {
    pub fn padded_sizes(&self) -> Vec<usize> {
        self.sizes.iter().zip(&self.pads).map(|(n, p)| n + p).collect()
    }
}

/// Pad count `round(fraction * n)`, proportional to resolution.
pub fn pad_amount(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).round() as usize
}

pub fn check_padding_fraction(fraction: f64) -> Result<()> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(Error::Invalid(format!("padding fraction {fraction} must lie in [0, 0.5)")));
    }
    Ok(())
}

/// Zero-pads every spatial axis on the high side.
pub fn domain_pad(tape: &Tape, x: &Tensor, d: usize, fraction: f64) -> Result<(Tensor, PadRecord)> {
    check_padding_fraction(fraction)?;
    if x.rank() < d {
        return Err(shape_err!("cannot pad {d} axes of {:?}", x.shape()));
    }
    let lead = x.rank() - d;
    let sizes = x.shape()[lead..].to_vec();
    let pads: Vec<usize> = sizes.iter().map(|&n| pad_amount(n, fraction)).collect();
    let record = PadRecord { sizes, pads };
    if record.pads.iter().all(|&p| p == 0) {
        return Ok((x.clone(), record));
    }
    let spec: Vec<(usize, usize)> = (0..x.rank()).map(|a| if a < lead { (0, 0) } else { (0, record.pads[a - lead]) }).collect();
    Ok((tape.constant_pad(x, &spec, 0.0)?, record))
}

/// Slices the trailing axes back to the recorded sizes.
pub fn domain_unpad(tape: &Tape, y: &Tensor, record: &PadRecord) -> Result<Tensor> {
    let d = record.sizes.len();
    let lead = y.rank() - d;
    if y.shape()[lead..] == record.sizes[..] {
        return Ok(y.clone());
    }
    let ranges: Vec<(usize, usize)> = (0..y.rank()).map(|a| if a < lead { (0, y.shape()[a]) } else { (0, record.sizes[a - lead]) }).collect();
    tape.slice(y, &ranges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_1d_and_2d() {
        let t = Tape::new();
        let x = Tensor::full(&[1, 1, 4], 7.0).unwrap();
        let e = grid_embedding(&t, &x, 1).unwrap();
        assert_eq!(e.shape(), &[1, 2, 4]);
        assert_eq!(&e.real_values().unwrap()[4..], &[0.0, 0.25, 0.5, 0.75]);
        let c = coordinate_channels(&[2, 2]).unwrap();
        assert_eq!(c.real_values().unwrap(), &[0.0, 0.0, 0.5, 0.5, 0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn padding_is_proportional_and_invertible() {
        let t = Tape::new();
        let x = Tensor::from_real(&[1, 1, 16], (0..16).map(f64::from).collect()).unwrap();
        let (p, rec) = domain_pad(&t, &x, 1, 0.25).unwrap();
        assert_eq!(p.shape(), &[1, 1, 20]);
        assert_eq!(pad_amount(32, 0.25), 8);
        assert!(domain_unpad(&t, &p, &rec).unwrap().bit_eq(&x));
        let (q, rec0) = domain_pad(&t, &x, 1, 0.0).unwrap();
        assert_eq!(rec0.pads, vec![0]);
        assert!(q.bit_eq(&x));
        assert!(domain_pad(&t, &x, 1, 0.5).is_err());
    }

    #[test]
    fn grid_function_validation() {
        assert!(GridFunction::unit(Tensor::full(&[1, 1, 1], 0.0).unwrap(), 1).is_err());
        assert!(GridFunction::new(Tensor::full(&[1, 1, 4], 0.0).unwrap(), vec![(1.0, 0.0)]).is_err());
        let g = GridFunction::new(Tensor::full(&[1, 1, 4], 0.0).unwrap(), vec![(-1.0, 1.0)]).unwrap();
        assert_eq!(g.coordinate(0, 2), 0.0);
    }
}
