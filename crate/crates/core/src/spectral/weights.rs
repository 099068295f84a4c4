//! Per-mode channel-mixing weights, dense or Tucker-factorized.
//!
//! The dense layout is `[2m_1, .., 2m_{d-1}, m_d, C_in, C_out]`. A Tucker
//! weight stores a core `G` of shape `[r_1, .., r_{d+2}]` (one rank per dense
//! axis) and a factor `U_k` of shape `[dense_k, r_k]` per axis; the dense
//! tensor is `G` contracted with every factor.

use super::modes::ModeSpec;
use crate::error::{shape_err, Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{contract_values, Tape, Tensor, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factorization {
    Dense,
    /// Ranks `ceil(fraction * axis)` on every dense axis.
    Tucker { rank_fraction: f64 },
}

#[derive(Debug, Clone)]
pub enum WeightData {
    Dense(Tensor),
    Tucker { core: Tensor, factors: Vec<Tensor> },
}

#[derive(Debug, Clone)]
pub struct SpectralWeights {
    spec: ModeSpec,
    in_channels: usize,
    out_channels: usize,
    data: WeightData,
}

pub fn dense_shape(spec: &ModeSpec, in_channels: usize, out_channels: usize) -> Vec<usize> {
    let mut s = spec.block_dims();
    s.push(in_channels);
    s.push(out_channels);
    s
}

/// Tucker ranks `ceil(fraction * axis)` for each dense axis.
pub fn tucker_ranks(dense: &[usize], rank_fraction: f64) -> Result<Vec<usize>> {
    if !(rank_fraction > 0.0 && rank_fraction <= 1.0) {
        return Err(Error::Invalid(format!("rank fraction {rank_fraction} must lie in (0, 1]")));
    }
    Ok(dense.iter().map(|&n| ((rank_fraction * n as f64).ceil() as usize).clamp(1, n)).collect())
}

fn uniform_complex(rng: &mut SplitMix64, n: usize, s: f64) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re = rng.uniform_symmetric(s);
            let im = rng.uniform_symmetric(s);
            C64::new(re, im)
        })
        .collect()
}

impl SpectralWeights {
    /// Random initialization. Dense entries have real and imaginary parts
    /// uniform in `(-s, s)` with `s = 1 / (C_in C_out)`. For Tucker weights the
    /// core uses the same law and each factor is uniform in `(-a_k, a_k)` with
    /// `a_k = sqrt(3 / (2 r_k))`, so reconstructed entries have the dense
    /// second moment.
    pub fn init(
        spec: &ModeSpec,
        in_channels: usize,
        out_channels: usize,
        kind: Factorization,
        rng: &mut SplitMix64,
    ) -> Result<SpectralWeights> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Invalid("spectral weights need at least one channel".into()));
        }
        let dense = dense_shape(spec, in_channels, out_channels);
        let s = 1.0 / (in_channels * out_channels) as f64;
        let data = match kind {
            Factorization::Dense => {
                let n = dense.iter().product();
                WeightData::Dense(Tensor::from_complex(&dense, uniform_complex(rng, n, s))?)
            }
            Factorization::Tucker { rank_fraction } => {
                let ranks = tucker_ranks(&dense, rank_fraction)?;
                let core = Tensor::from_complex(&ranks, uniform_complex(rng, ranks.iter().product(), s))?;
                let mut factors = Vec::with_capacity(ranks.len());
                for (&n, &r) in dense.iter().zip(&ranks) {
                    let a = (3.0 / (2.0 * r as f64)).sqrt();
                    factors.push(Tensor::from_complex(&[n, r], uniform_complex(rng, n * r, a))?);
                }
                WeightData::Tucker { core, factors }
            }
        };
        Ok(SpectralWeights { spec: spec.clone(), in_channels, out_channels, data })
    }

    pub fn from_seed(
        spec: &ModeSpec,
        in_channels: usize,
        out_channels: usize,
        kind: Factorization,
        seed: u64,
    ) -> Result<SpectralWeights> {
        SpectralWeights::init(spec, in_channels, out_channels, kind, &mut SplitMix64::new(seed))
    }

    /// Wraps existing tensors, validating every shape.
    pub fn from_data(spec: &ModeSpec, in_channels: usize, out_channels: usize, data: WeightData) -> Result<SpectralWeights> {
        let dense = dense_shape(spec, in_channels, out_channels);
        match &data {
            WeightData::Dense(w) => {
                if w.shape() != dense.as_slice() || !w.is_complex() {
                    return Err(shape_err!("dense weight {:?} must be complex with shape {dense:?}", w.shape()));
                }
            }
            WeightData::Tucker { core, factors } => {
                if factors.len() != dense.len() || core.rank() != dense.len() || !core.is_complex() {
                    return Err(shape_err!(
                        "tucker weight needs a complex rank-{} core and {} factors",
                        dense.len(),
                        dense.len()
                    ));
                }
                for (k, (f, &n)) in factors.iter().zip(&dense).enumerate() {
                    let r = core.shape()[k];
                    if f.shape() != [n, r] || !f.is_complex() || r > n {
                        return Err(shape_err!(
                            "factor {k} has shape {:?}, expected complex [{n}, {r}] with rank <= {n}",
                            f.shape()
                        ));
                    }
                }
            }
        }
        Ok(SpectralWeights { spec: spec.clone(), in_channels, out_channels, data })
    }

    pub fn spec(&self) -> &ModeSpec {
        &self.spec
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn data(&self) -> &WeightData {
        &self.data
    }

    pub fn is_tucker(&self) -> bool {
        matches!(self.data, WeightData::Tucker { .. })
    }

    pub fn dense_shape(&self) -> Vec<usize> {
        dense_shape(&self.spec, self.in_channels, self.out_channels)
    }

    /// Number of stored complex entries.
    pub fn complex_count(&self) -> usize {
        self.tensors().iter().map(|t| t.numel()).sum()
    }

    /// Trainable real scalars (complex entries count twice).
    pub fn param_count(&self) -> usize {
        2 * self.complex_count()
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        match &self.data {
            WeightData::Dense(w) => vec![w],
            WeightData::Tucker { core, factors } => std::iter::once(core).chain(factors).collect(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match &mut self.data {
            WeightData::Dense(w) => vec![w],
            WeightData::Tucker { core, factors } => std::iter::once(core).chain(factors.iter_mut()).collect(),
        }
    }

    /// Dense weight, recorded on the tape when the parameters are tracked.
    pub fn materialize(&self, tape: &Tape) -> Result<Tensor> {
        match &self.data {
            WeightData::Dense(w) => Ok(w.clone()),
            WeightData::Tucker { core, factors } => {
                // contracting axis 0 with a factor appends the full axis at the
                // end, so after one pass the axes are back in order
                let mut t = core.clone();
                for f in factors {
                    t = tape.contract(&t, f, &[(0, 1)])?;
                }
                Ok(t)
            }
        }
    }

    /// Untracked dense reconstruction.
    pub fn reconstruct(&self) -> Result<Tensor> {
        let detached = SpectralWeights {
            spec: self.spec.clone(),
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            data: match &self.data {
                WeightData::Dense(w) => WeightData::Dense(w.detach()),
                WeightData::Tucker { core, factors } => WeightData::Tucker {
                    core: core.detach(),
                    factors: factors.iter().map(Tensor::detach).collect(),
                },
            },
        };
        detached.materialize(&Tape::new())
    }
}

/// Applies Tucker weights to a retained block `x` of shape `[B, C_in, K..]`
/// without forming the dense tensor: the input factor and every spatial
/// factor are contracted into the core per mode, then the output factor.
pub fn tucker_mode_mix_values(
    core: &Tensor,
    factors: &[Tensor],
    x: &[C64],
    batch: usize,
    block: &[usize],
) -> Result<Vec<C64>> {
    let g = core.complex_values()?;
    let d = block.len();
    if factors.len() != d + 2 {
        return Err(shape_err!("expected {} factors, got {}", d + 2, factors.len()));
    }
    let u_in = &factors[d];
    let u_out = &factors[d + 1];
    let (cin, r_in) = (u_in.shape()[0], u_in.shape()[1]);
    let (cout, r_out) = (u_out.shape()[0], u_out.shape()[1]);
    let k_len: usize = block.iter().product();
    if x.len() != batch * cin * k_len {
        return Err(shape_err!("input block has {} values, expected {}", x.len(), batch * cin * k_len));
    }
    // x projected onto the input rank: [r_in, B, K]
    let (_, xr) = contract_values(u_in.complex_values()?, &[cin, r_in], x, &[batch, cin, k_len], &[(0, 1)])?;
    let sp_ranks: Vec<usize> = core.shape()[..d].to_vec();
    let sp_len: usize = sp_ranks.iter().product();
    let mut out = vec![C64::new(0.0, 0.0); batch * cout * k_len];
    let mut idx = vec![0usize; d];
    for k in 0..k_len {
        // spatial factor row product u_k[r_1..r_d]
        let mut rem = k;
        for a in (0..d).rev() {
            idx[a] = rem % block[a];
            rem /= block[a];
        }
        let mut uk = vec![C64::new(1.0, 0.0)];
        for a in 0..d {
            let f = factors[a].complex_values()?;
            let r = sp_ranks[a];
            let row = &f[idx[a] * r..(idx[a] + 1) * r];
            uk = uk.iter().flat_map(|&p| row.iter().map(move |&q| p * q)).collect();
        }
        // core reduced over spatial ranks: [r_in, r_out]
        let (_, gk) = contract_values(&uk, &[sp_len], g, &[sp_len, r_in, r_out], &[(0, 0)])?;
        for b in 0..batch {
            let mut t = vec![C64::new(0.0, 0.0); r_out];
            for ri in 0..r_in {
                let xv = xr[ri * batch * k_len + b * k_len + k];
                for (ro, tv) in t.iter_mut().enumerate() {
                    *tv += xv * gk[ri * r_out + ro];
                }
            }
            let uo = u_out.complex_values()?;
            for o in 0..cout {
                let mut acc = C64::new(0.0, 0.0);
                for ro in 0..r_out {
                    acc += uo[o * r_out + ro] * t[ro];
                }
                out[b * cout * k_len + o * k_len + k] = acc;
            }
        }
    }
    Ok(out)
}
