//! Spectral convolution: FFT, per-mode channel mixing, inverse FFT.

use super::modes::{active_mask, ModeSpec};
use super::weights::SpectralWeights;
use super::real::half_len;
use crate::error::{shape_err, Error, Result};
use crate::tensor::{permute_values, Storage, Tape, Tensor, C64};

fn mix_forward(xt: &[C64], w: &[C64], k_len: usize, b: usize, ci: usize, co: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); k_len * b * co];
    for k in 0..k_len {
        let wk = &w[k * ci * co..(k + 1) * ci * co];
        for bb in 0..b {
            let row = &mut out[(k * b + bb) * co..(k * b + bb + 1) * co];
            let xrow = &xt[(k * b + bb) * ci..(k * b + bb + 1) * ci];
            for (i, &xv) in xrow.iter().enumerate() {
                for (r, &wv) in row.iter_mut().zip(&wk[i * co..(i + 1) * co]) {
                    *r += xv * wv;
                }
            }
        }
    }
    out
}

impl Tape {
    /// Per-mode channel mixing `out[b,o,k] = sum_i x[b,i,k] w[k,i,o]` for a
    /// block `x: [B, C_in, K..]` and weights `w: [K.., C_in, C_out]`.
    pub fn mode_mix(&self, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        let (xv, wv) = (x.complex_values()?, w.complex_values()?);
        if x.rank() < 3 || w.rank() != x.rank() {
            return Err(shape_err!("mode_mix needs x [B, C_in, K..] and w [K.., C_in, C_out], got {:?} and {:?}", x.shape(), w.shape()));
        }
        let d = x.rank() - 2;
        let (b, ci) = (x.shape()[0], x.shape()[1]);
        if x.shape()[2..] != w.shape()[..d] || w.shape()[d] != ci {
            return Err(shape_err!("mode_mix shapes {:?} and {:?} are inconsistent", x.shape(), w.shape()));
        }
        let co = w.shape()[d + 1];
        let k_len: usize = x.shape()[2..].iter().product();
        // [B, C_in, K] -> [K, B, C_in]
        let xt = permute_values(xv, &[b, ci, k_len], &[2, 0, 1]);
        let yt = mix_forward(&xt, wv, k_len, b, ci, co);
        let y = permute_values(&yt, &[k_len, b, co], &[1, 2, 0]);
        let mut shape = vec![b, co];
        shape.extend_from_slice(&x.shape()[2..]);
        if !self.tracking(&[x, w]) {
            return Ok(Tensor::from_parts(shape, Storage::Complex(y)));
        }
        let wc = w.clone();
        self.record(&[x, w], shape, Storage::Complex(y), move |g, needs| {
            let gt = permute_values(g.complex(), &[b, co, k_len], &[2, 0, 1]);
            let wv = wc.storage().complex();
            let gx = needs[0].then(|| {
                let mut gx = vec![C64::new(0.0, 0.0); k_len * b * ci];
                for k in 0..k_len {
                    let wk = &wv[k * ci * co..(k + 1) * ci * co];
                    for bb in 0..b {
                        let grow = &gt[(k * b + bb) * co..(k * b + bb + 1) * co];
                        for i in 0..ci {
                            let mut acc = C64::new(0.0, 0.0);
                            for (gv, wv) in grow.iter().zip(&wk[i * co..(i + 1) * co]) {
                                acc += gv * wv.conj();
                            }
                            gx[(k * b + bb) * ci + i] = acc;
                        }
                    }
                }
                Storage::Complex(permute_values(&gx, &[k_len, b, ci], &[1, 2, 0]))
            });
            let gw = needs[1].then(|| {
                let mut gw = vec![C64::new(0.0, 0.0); k_len * ci * co];
                for k in 0..k_len {
                    let gwk = &mut gw[k * ci * co..(k + 1) * ci * co];
                    for bb in 0..b {
                        let grow = &gt[(k * b + bb) * co..(k * b + bb + 1) * co];
                        for i in 0..ci {
                            let xc = xt[(k * b + bb) * ci + i].conj();
                            for (r, gv) in gwk[i * co..(i + 1) * co].iter_mut().zip(grow) {
                                *r += xc * gv;
                            }
                        }
                    }
                }
                Storage::Complex(gw)
            });
            vec![gx, gw]
        })
    }

    /// Spectral resampling of a real field `[.., n_1.., n_d]` to new spatial
    /// sizes, one axis at a time: frequencies with `|k| < min(n, n') / 2` are
    /// kept and rescaled for the new grid, everything else (including an
    /// ambiguous Nyquist bin) is zero. Exact for fields band-limited below the
    /// coarser grid's Nyquist frequency.
    pub fn spectral_resample(&self, x: &Tensor, out_sizes: &[usize]) -> Result<Tensor> {
        let d = out_sizes.len();
        let r = x.rank();
        if r < d || out_sizes.contains(&0) {
            return Err(shape_err!("cannot resample {d} axes of shape {:?} to {out_sizes:?}", x.shape()));
        }
        let mut h = x.clone();
        for (a, &m) in out_sizes.iter().enumerate() {
            let axis = r - d + a;
            let n = h.shape()[axis];
            if n == m {
                continue;
            }
            let mut perm: Vec<usize> = (0..r).filter(|&i| i != axis).collect();
            perm.push(axis);
            let mut inverse = vec![0; r];
            for (i, &p) in perm.iter().enumerate() {
                inverse[p] = i;
            }
            let moved = if axis + 1 == r { h } else { self.permute(&h, &perm)? };
            let keep = n.min(m).div_ceil(2);
            let z = self.narrow(&self.rfftn(&moved, 1)?, r - 1, 0, keep)?;
            let mut pads = vec![(0, 0); r];
            pads[r - 1] = (0, half_len(m) - keep);
            let z = self.scale(&self.constant_pad(&z, &pads, 0.0)?, m as f64 / n as f64)?;
            let y = self.irfftn(&z, &[m])?;
            h = if axis + 1 == r { y } else { self.permute(&y, &inverse)? };
        }
        Ok(h)
    }
}

/// Options for [`spectral_conv`].
#[derive(Debug, Clone, Default)]
pub struct ConvOptions<'a> {
    /// Active sub-block of the retained modes; weights outside it are masked.
    pub active: Option<&'a ModeSpec>,
    /// Spatial sizes at which the output is synthesized.
    pub output_sizes: Option<&'a [usize]>,
}

/// Zero-one complex mask of shape `[K.., 1, 1]` for the active sub-block.
pub fn weight_mask(spec: &ModeSpec, active: &ModeSpec) -> Result<Tensor> {
    let mask = active_mask(spec, active)?;
    let mut shape = spec.block_dims();
    shape.extend([1, 1]);
    Tensor::from_complex(&shape, mask.into_iter().map(|m| C64::new(m, 0.0)).collect())
}

/// Spectral convolution of `x: [B, C_in, n_1.., n_d]` with a dense weight
/// tensor `w: [K.., C_in, C_out]` over the modes of `spec`.
pub fn spectral_conv_dense(tape: &Tape, x: &Tensor, w: &Tensor, spec: &ModeSpec, opts: &ConvOptions) -> Result<Tensor> {
    let d = spec.dims();
    if x.rank() != d + 2 {
        return Err(shape_err!("expected input of rank {} ([B, C, spatial..]), got {:?}", d + 2, x.shape()));
    }
    let cin = x.shape()[1];
    if w.rank() != d + 2 || w.shape()[d] != cin {
        return Err(shape_err!("input has {cin} channels but weights have shape {:?}", w.shape()));
    }
    let sizes = x.shape()[2..].to_vec();
    spec.check(&sizes)?;
    let out_sizes = opts.output_sizes.map_or_else(|| sizes.clone(), <[usize]>::to_vec);
    if out_sizes.len() != d {
        return Err(Error::Invalid(format!("output sizes {out_sizes:?} do not have {d} axes")));
    }
    spec.check(&out_sizes)?;
    let w = match opts.active {
        Some(active) if active != spec => tape.mul(w, &weight_mask(spec, active)?)?,
        _ => w.clone(),
    };
    let z = tape.rfftn(x, d)?;
    let t = tape.truncate_modes(&z, &sizes, spec)?;
    let mut y = tape.mode_mix(&t, &w)?;
    if out_sizes != sizes {
        let ratio = out_sizes.iter().product::<usize>() as f64 / sizes.iter().product::<usize>() as f64;
        y = tape.scale(&y, ratio)?;
    }
    let z = tape.expand_modes(&y, &out_sizes, spec)?;
    tape.irfftn(&z, &out_sizes)
}

/// Spectral convolution with dense or Tucker weights.
pub fn spectral_conv(tape: &Tape, x: &Tensor, weights: &SpectralWeights, opts: &ConvOptions) -> Result<Tensor> {
    if x.rank() >= 2 && x.shape()[1] != weights.in_channels() {
        return Err(shape_err!(
            "input has {} channels, spectral weights expect {}",
            x.shape()[1],
            weights.in_channels()
        ));
    }
    let w = weights.materialize(tape)?;
    spectral_conv_dense(tape, x, &w, weights.spec(), opts)
}
