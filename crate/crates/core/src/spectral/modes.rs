//! Retained Fourier modes in the corner layout.
//!
//! On a full (complex) axis of size `n` with `m` retained modes the block
//! keeps indices `0..m` followed by `n-m..n` (low positive, then low negative
//! frequencies). On the Hermitian half axis only `0..m` is kept.

use super::real::spectrum_dims;
use crate::error::{shape_err, Error, Result};
use crate::tensor::{Storage, Tape, Tensor, C64};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSpec {
    modes: Vec<usize>,
}

impl ModeSpec {
    pub fn new(modes: Vec<usize>) -> Result<ModeSpec> {
        if modes.is_empty() {
            return Err(Error::Invalid("mode spec needs at least one axis".into()));
        }
        if let Some(i) = modes.iter().position(|&m| m == 0) {
            return Err(Error::Invalid(format!("retained modes on axis {i} must be at least 1")));
        }
        Ok(ModeSpec { modes })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn dims(&self) -> usize {
        self.modes.len()
    }

    /// Shape of the retained block: `[2m_1, .., 2m_{d-1}, m_d]`.
    pub fn block_dims(&self) -> Vec<usize> {
        let d = self.modes.len();
        self.modes.iter().enumerate().map(|(i, &m)| if i + 1 == d { m } else { 2 * m }).collect()
    }

    pub fn block_len(&self) -> usize {
        self.block_dims().iter().product()
    }

    /// Checks `n_i >= 2 m_i` on every axis, naming the first offending one.
    pub fn check(&self, sizes: &[usize]) -> Result<()> {
        if sizes.len() != self.modes.len() {
            return Err(shape_err!(
                "{} spatial sizes given for a {}-dimensional mode spec",
                sizes.len(),
                self.modes.len()
            ));
        }
        for (dim, (&size, &modes)) in sizes.iter().zip(&self.modes).enumerate() {
            if size < 2 * modes {
                return Err(Error::ModeViolation { dim, size, modes });
            }
        }
        Ok(())
    }

    /// Component-wise minimum with another spec of the same rank.
    pub fn min(&self, other: &ModeSpec) -> ModeSpec {
        ModeSpec { modes: self.modes.iter().zip(&other.modes).map(|(a, b)| *a.min(b)).collect() }
    }
}

/// Spectrum index of block index `t` on a full axis.
pub fn corner_index(t: usize, n: usize, m: usize) -> usize {
    if t < m {
        t
    } else {
        n - 2 * m + t
    }
}

/// For every element of the retained block (row-major), its flat offset
/// inside the spectrum of a signal with spatial `sizes`.
pub fn corner_offsets(sizes: &[usize], spec: &ModeSpec) -> Result<Vec<usize>> {
    spec.check(sizes)?;
    let dims = spectrum_dims(sizes);
    let block = spec.block_dims();
    let d = dims.len();
    let maps: Vec<Vec<usize>> = (0..d)
        .map(|i| {
            (0..block[i])
                .map(|t| if i + 1 == d { t } else { corner_index(t, dims[i], spec.modes[i]) })
                .collect()
        })
        .collect();
    let mut offsets = vec![0usize];
    for i in 0..d {
        let mut next = Vec::with_capacity(offsets.len() * block[i]);
        for &o in &offsets {
            for &ix in &maps[i] {
                next.push(o * dims[i] + ix);
            }
        }
        offsets = next;
    }
    Ok(offsets)
}

fn gather(z: &[C64], offsets: &[usize], spec_len: usize) -> Vec<C64> {
    let blocks = z.len() / spec_len;
    let mut out = Vec::with_capacity(blocks * offsets.len());
    for b in 0..blocks {
        let src = &z[b * spec_len..(b + 1) * spec_len];
        out.extend(offsets.iter().map(|&o| src[o]));
    }
    out
}

fn scatter(t: &[C64], offsets: &[usize], spec_len: usize) -> Vec<C64> {
    let blocks = t.len() / offsets.len();
    let mut out = vec![C64::new(0.0, 0.0); blocks * spec_len];
    for b in 0..blocks {
        let dst = &mut out[b * spec_len..(b + 1) * spec_len];
        for (&o, &v) in offsets.iter().zip(&t[b * offsets.len()..]) {
            dst[o] = v;
        }
    }
    out
}

fn lead_shape(shape: &[usize], d: usize) -> Result<Vec<usize>> {
    if shape.len() < d {
        return Err(shape_err!("tensor of rank {} has fewer than {d} spectral axes", shape.len()));
    }
    Ok(shape[..shape.len() - d].to_vec())
}

impl Tape {
    /// Extracts the retained corner block from a half spectrum whose
    /// trailing axes belong to spatial `sizes`.
    pub fn truncate_modes(&self, z: &Tensor, sizes: &[usize], spec: &ModeSpec) -> Result<Tensor> {
        let v = z.complex_values()?;
        let d = sizes.len();
        let dims = spectrum_dims(sizes);
        let mut shape = lead_shape(z.shape(), d)?;
        if z.shape()[shape.len()..] != dims[..] {
            return Err(shape_err!("spectrum shape {:?} does not match sizes {sizes:?}", z.shape()));
        }
        let offsets = corner_offsets(sizes, spec)?;
        let spec_len: usize = dims.iter().product();
        let data = gather(v, &offsets, spec_len);
        shape.extend(spec.block_dims());
        self.record(&[z], shape, Storage::Complex(data), move |g, _| {
            vec![Some(Storage::Complex(scatter(g.complex(), &offsets, spec_len)))]
        })
    }

    /// Places a retained block into an otherwise zero half spectrum for
    /// spatial `sizes`. Adjoint of [`Tape::truncate_modes`].
    pub fn expand_modes(&self, t: &Tensor, sizes: &[usize], spec: &ModeSpec) -> Result<Tensor> {
        let v = t.complex_values()?;
        let d = sizes.len();
        let mut shape = lead_shape(t.shape(), d)?;
        if t.shape()[shape.len()..] != spec.block_dims()[..] {
            return Err(shape_err!(
                "block shape {:?} does not match retained modes {:?}",
                t.shape(),
                spec.modes()
            ));
        }
        let offsets = corner_offsets(sizes, spec)?;
        let dims = spectrum_dims(sizes);
        let spec_len: usize = dims.iter().product();
        let data = scatter(v, &offsets, spec_len);
        shape.extend(dims);
        self.record(&[t], shape, Storage::Complex(data), move |g, _| {
            vec![Some(Storage::Complex(gather(g.complex(), &offsets, spec_len)))]
        })
    }
}

/// Real 0/1 indicator over the retained block marking the active sub-block
/// (`active <= spec` per axis), in the same corner layout.
pub fn active_mask(spec: &ModeSpec, active: &ModeSpec) -> Result<Vec<f64>> {
    if active.dims() != spec.dims() || active.modes.iter().zip(&spec.modes).any(|(a, m)| a > m) {
        return Err(Error::Invalid(format!(
            "active modes {:?} exceed retained modes {:?}",
            active.modes, spec.modes
        )));
    }
    let block = spec.block_dims();
    let d = block.len();
    let keep: Vec<Vec<bool>> = (0..d)
        .map(|i| {
            let (m, a) = (spec.modes[i], active.modes[i]);
            (0..block[i])
                .map(|t| if i + 1 == d || t < m { t < a } else { t >= 2 * m - a })
                .collect()
        })
        .collect();
    let mut mask = vec![1.0];
    for k in keep {
        mask = mask.iter().flat_map(|&v| k.iter().map(move |&on| if on { v } else { 0.0 })).collect();
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_selection_rule() {
        let spec = ModeSpec::new(vec![2, 1]).unwrap();
        // full axis n=8, m=2; trailing half axis of a size-2 signal
        let offs = corner_offsets(&[8, 2], &spec).unwrap();
        let rows: Vec<usize> = offs.iter().map(|o| o / 2).collect();
        assert_eq!(rows, vec![0, 1, 6, 7]);
    }

    #[test]
    fn violation_names_dimension() {
        let spec = ModeSpec::new(vec![4, 4]).unwrap();
        match spec.check(&[8, 6]) {
            Err(Error::ModeViolation { dim, size, modes }) => assert_eq!((dim, size, modes), (1, 6, 4)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expand_of_truncate_zeroes_discarded() {
        let t = Tape::new();
        let sizes = [8usize, 6];
        let dims = spectrum_dims(&sizes);
        let n: usize = dims.iter().product();
        let vals: Vec<C64> = (0..n).map(|i| C64::new(i as f64, -(i as f64))).collect();
        let z = Tensor::from_complex(&[1, 8, 4], vals.clone()).unwrap();
        let spec = ModeSpec::new(vec![2, 2]).unwrap();
        let back = t.expand_modes(&t.truncate_modes(&z, &sizes, &spec).unwrap(), &sizes, &spec).unwrap();
        let got = back.complex_values().unwrap();
        for r in 0..8 {
            for c in 0..4 {
                let keep = [0, 1, 6, 7].contains(&r) && c < 2;
                let want = if keep { vals[r * 4 + c] } else { C64::new(0.0, 0.0) };
                assert_eq!(got[r * 4 + c], want);
            }
        }
    }

    #[test]
    fn mask_keeps_inner_corners() {
        let spec = ModeSpec::new(vec![3]).unwrap();
        let active = ModeSpec::new(vec![1]).unwrap();
        assert_eq!(active_mask(&spec, &active).unwrap(), vec![1.0, 0.0, 0.0]);
        let spec = ModeSpec::new(vec![3, 2]).unwrap();
        let active = ModeSpec::new(vec![1, 1]).unwrap();
        let m = active_mask(&spec, &active).unwrap();
        // rows 0..6 in corner layout: +0,+1,+2,-3,-2,-1 ; keep +0 and -1
        let want: Vec<f64> = (0..6)
            .flat_map(|r| (0..2).map(move |c| if (r == 0 || r == 5) && c == 0 { 1.0 } else { 0.0 }))
            .collect();
        assert_eq!(m, want);
        assert!(active_mask(&active, &spec).is_err());
    }
}
