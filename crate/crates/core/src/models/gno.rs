use super::fno::{get, parse};
use super::grid::coordinate_channels;
use super::layers::{prefixed, prefixed_mut, Linear, Mlp, Params};
use crate::error::{shape_err, Error, Result};
use crate::format::KeyValues;
use crate::graph::{kernel_integral, radius_search, Kernel, NeighborIndex, PointCloud};
use crate::rng::SplitMix64;
use crate::tensor::{Tape, Tensor};

/// Architecture of a graph neural operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GnoConfig {
    pub coord_dim: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub hidden_channels: usize,
    pub kernel_hidden: usize,
    pub radius: f64,
    pub seed: u64,
}

impl GnoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coord_dim == 0 || self.in_channels == 0 || self.out_channels == 0 || self.hidden_channels == 0 || self.kernel_hidden == 0 {
            return Err(Error::Config("GNO dimensions and channel counts must be at least 1".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Config(format!("GNO radius must be positive, got {}", self.radius)));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert("model.kind".into(), "gno".into());
        kv.insert("model.dim".into(), self.coord_dim.to_string());
        kv.insert("model.in_channels".into(), self.in_channels.to_string());
        kv.insert("model.out_channels".into(), self.out_channels.to_string());
        kv.insert("model.hidden_channels".into(), self.hidden_channels.to_string());
        kv.insert("model.kernel_hidden".into(), self.kernel_hidden.to_string());
        kv.insert("model.radius".into(), self.radius.to_string());
        kv.insert("model.seed".into(), self.seed.to_string());
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<GnoConfig> {
        let c = GnoConfig {
            coord_dim: parse(kv, "model.dim")?,
            in_channels: parse(kv, "model.in_channels")?,
            out_channels: parse(kv, "model.out_channels")?,
            hidden_channels: parse(kv, "model.hidden_channels")?,
            kernel_hidden: parse(kv, "model.kernel_hidden")?,
            radius: parse(kv, "model.radius")?,
            seed: parse(kv, "model.seed")?,
        };
        get(kv, "model.kind")?;
        c.validate()?;
        Ok(c)
    }
}

/// Perceptron kernel `kappa(x, y)` producing a `C x C` matrix per pair.
pub struct MlpKernel<'a> {
    pub mlp: &'a Mlp,
    pub channels: usize,
}

impl Kernel for MlpKernel<'_> {
    fn in_channels(&self) -> usize {
        self.channels
    }

    fn out_channels(&self) -> usize {
        self.channels
    }

    fn evaluate(&self, tape: &Tape, pairs: &Tensor) -> Result<Tensor> {
        self.mlp.forward_rows(tape, pairs)
    }
}

/// Lifting, one kernel integral, gelu, projection.
#[derive(Debug, Clone)]
pub struct Gno {
    pub config: GnoConfig,
    pub lift: Linear,
    pub kernel: Mlp,
    pub proj: Linear,
}

impl Gno {
    pub fn new(config: GnoConfig) -> Result<Gno> {
        config.validate()?;
        let mut rng = SplitMix64::new(config.seed);
        let h = config.hidden_channels;
        let lift = Linear::init(config.in_channels, h, &mut rng)?;
        let kernel = Mlp::init(2 * config.coord_dim, config.kernel_hidden, h * h, &mut rng)?;
        let proj = Linear::init(h, config.out_channels, &mut rng)?;
        Ok(Gno { config, lift, kernel, proj })
    }

    /// Maps features on `input` to features `[N_q, C_out]` at `queries`.
    /// The neighbor index is computed with the configured radius unless given.
    pub fn forward(&self, tape: &Tape, input: &PointCloud, queries: &Tensor, index: Option<&NeighborIndex>) -> Result<Tensor> {
        let c = &self.config;
        if input.dim() != c.coord_dim || queries.rank() != 2 || queries.shape()[1] != c.coord_dim {
            return Err(shape_err!(
                "GNO expects {}-dimensional coordinates, got sources {:?} and queries {:?}",
                c.coord_dim,
                input.coords.shape(),
                queries.shape()
            ));
        }
        if input.channels() != c.in_channels {
            return Err(shape_err!("GNO expects {} input channels, got {}", c.in_channels, input.channels()));
        }
        let owned;
        let index = match index {
            Some(i) => i,
            None => {
                owned = radius_search(queries, &input.coords, c.radius)?;
                &owned
            }
        };
        let lifted = PointCloud { coords: input.coords.clone(), features: self.lift.forward_rows(tape, &input.features)? };
        let kernel = MlpKernel { mlp: &self.kernel, channels: c.hidden_channels };
        let out = kernel_integral(tape, queries, &lifted, index, &kernel)?;
        let h = tape.gelu(&out.features)?;
        self.proj.forward_rows(tape, &h)
    }

    /// Applies the operator to every sample of a grid batch `[B, C, n..]`,
    /// treating grid points (normalized coordinates) as both sources and queries.
    pub fn forward_grid(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let d = self.config.coord_dim;
        if x.rank() != d + 2 {
            return Err(shape_err!("expected [B, C, {d} spatial axes], got {:?}", x.shape()));
        }
        let (b, ch) = (x.shape()[0], x.shape()[1]);
        let sizes = x.shape()[2..].to_vec();
        let n: usize = sizes.iter().product();
        let cc = coordinate_channels(&sizes)?;
        let coords = Tensor::from_real(&[n, d], crate::tensor::permute_values(cc.real_values()?, &[d, n], &[1, 0]))?;
        let index = radius_search(&coords, &coords, self.config.radius)?;
        let mut outs = Vec::with_capacity(b);
        for s in 0..b {
            let xs = tape.reshape(&tape.narrow(x, 0, s, s + 1)?, &[ch, n])?;
            let rows = tape.permute(&xs, &[1, 0])?;
            let cloud = PointCloud::new(coords.clone(), rows)?;
            let y = self.forward(tape, &cloud, &coords, Some(&index))?;
            let co = y.shape()[1];
            let mut shape = vec![1, co];
            shape.extend_from_slice(&sizes);
            outs.push(tape.reshape(&tape.permute(&y, &[1, 0])?, &shape)?);
        }
        let refs: Vec<&Tensor> = outs.iter().collect();
        tape.concat(&refs, 0)
    }
}

impl Params for Gno {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("lift", self.lift.params());
        v.extend(prefixed("kernel", self.kernel.params()));
        v.extend(prefixed("proj", self.proj.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = prefixed_mut("lift", self.lift.params_mut());
        v.extend(prefixed_mut("kernel", self.kernel.params_mut()));
        v.extend(prefixed_mut("proj", self.proj.params_mut()));
        v
    }
}
