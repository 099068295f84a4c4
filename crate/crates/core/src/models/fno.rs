use super::grid::{check_padding_fraction, domain_pad, domain_unpad, grid_embedding, pad_amount};
use super::layers::{prefixed, prefixed_mut, Linear, Mlp, Params};
use crate::error::{shape_err, Error, Result};
use crate::format::KeyValues;
use crate::rng::SplitMix64;
use crate::spectral::{spectral_conv, ConvOptions, Factorization, ModeSpec, SpectralWeights};
use crate::tensor::{Tape, Tensor};

/// Architecture of a (tensorized) Fourier neural operator.
#[derive(Debug, Clone, PartialEq)]
pub struct FnoConfig {
    pub dim: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub hidden_channels: usize,
    pub n_layers: usize,
    pub modes: Vec<usize>,
    pub padding_fraction: f64,
    pub factorization: Factorization,
    pub positional_embedding: bool,
    pub seed: u64,
}

impl FnoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::Config(format!("spatial rank {} unsupported (1 or 2)", self.dim)));
        }
        if self.modes.len() != self.dim {
            return Err(Error::Config(format!("{} mode counts for {} spatial axes", self.modes.len(), self.dim)));
        }
        if self.n_layers == 0 || self.hidden_channels == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("layer and channel counts must be at least 1".into()));
        }
        check_padding_fraction(self.padding_fraction).map_err(|e| Error::Config(e.to_string()))?;
        if let Factorization::Tucker { rank_fraction } = self.factorization {
            if !(rank_fraction > 0.0 && rank_fraction <= 1.0) {
                return Err(Error::Config(format!("rank fraction {rank_fraction} must lie in (0, 1]")));
            }
        }
        ModeSpec::new(self.modes.clone()).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn mode_spec(&self) -> ModeSpec {
        ModeSpec::new(self.modes.clone()).expect("validated mode spec")
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert("model.kind".into(), "fno".into());
        kv.insert("model.dim".into(), self.dim.to_string());
        kv.insert("model.in_channels".into(), self.in_channels.to_string());
        kv.insert("model.out_channels".into(), self.out_channels.to_string());
        kv.insert("model.hidden_channels".into(), self.hidden_channels.to_string());
        kv.insert("model.n_layers".into(), self.n_layers.to_string());
        kv.insert("model.modes".into(), join(&self.modes));
        kv.insert("model.padding_fraction".into(), self.padding_fraction.to_string());
        kv.insert("model.factorization".into(), factorization_str(self.factorization));
        kv.insert("model.positional_embedding".into(), self.positional_embedding.to_string());
        kv.insert("model.seed".into(), self.seed.to_string());
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<FnoConfig> {
        let c = FnoConfig {
            dim: parse(kv, "model.dim")?,
            in_channels: parse(kv, "model.in_channels")?,
            out_channels: parse(kv, "model.out_channels")?,
            hidden_channels: parse(kv, "model.hidden_channels")?,
            n_layers: parse(kv, "model.n_layers")?,
            modes: parse_list(get(kv, "model.modes")?)?,
            padding_fraction: parse(kv, "model.padding_fraction")?,
            factorization: parse_factorization(get(kv, "model.factorization")?)?,
            positional_embedding: parse(kv, "model.positional_embedding")?,
            seed: parse(kv, "model.seed")?,
        };
        c.validate()?;
        Ok(c)
    }
}

pub(crate) fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| Error::Config(format!("invalid integer list {s:?}"))))
        .collect()
}

pub fn factorization_str(f: Factorization) -> String {
    match f {
        Factorization::Dense => "dense".into(),
        Factorization::Tucker { rank_fraction } => format!("tucker:{rank_fraction}"),
    }
}

pub fn parse_factorization(s: &str) -> Result<Factorization> {
    if s == "dense" {
        return Ok(Factorization::Dense);
    }
    if let Some(r) = s.strip_prefix("tucker:") {
        let rank_fraction = r.parse().map_err(|_| Error::Config(format!("invalid rank fraction in {s:?}")))?;
        return Ok(Factorization::Tucker { rank_fraction });
    }
    Err(Error::Config(format!("unknown factorization {s:?} (dense | tucker:<fraction>)")))
}

pub(crate) fn get<'a>(kv: &'a KeyValues, key: &str) -> Result<&'a str> {
    kv.get(key).map(String::as_str).ok_or_else(|| Error::Config(format!("missing key {key}")))
}

pub(crate) fn parse<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<T> {
    let v = get(kv, key)?;
    v.parse().map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
}

/// One Fourier layer: spectral convolution plus pointwise skip.
#[derive(Debug, Clone)]
pub struct FnoBlock {
    pub spectral: SpectralWeights,
    pub skip: Linear,
}

#[derive(Debug, Clone)]
pub struct Fno {
    pub config: FnoConfig,
    pub lift: Mlp,
    pub blocks: Vec<FnoBlock>,
    pub proj: Mlp,
}

/// Per-call options of [`Fno::forward`].
#[derive(Debug, Clone, Default)]
pub struct ForwardOptions<'a> {
    /// Synthesize the output on these spatial sizes instead of the input's.
    pub output_sizes: Option<&'a [usize]>,
    /// Currently active Fourier modes (incremental training).
    pub active_modes: Option<&'a ModeSpec>,
}

impl Fno {
    pub fn new(config: FnoConfig) -> Result<Fno> {
        config.validate()?;
        let mut rng = SplitMix64::new(config.seed);
        let lift_in = config.in_channels + if config.positional_embedding { config.dim } else { 0 };
        let h = config.hidden_channels;
        let lift = Mlp::init(lift_in, h, h, &mut rng)?;
        let spec = config.mode_spec();
        let mut blocks = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            let spectral = SpectralWeights::init(&spec, h, h, config.factorization, &mut rng)?;
            let skip = Linear::init(h, h, &mut rng)?;
            blocks.push(FnoBlock { spectral, skip });
        }
        let proj = Mlp::init(h, h, config.out_channels, &mut rng)?;
        Ok(Fno { config, lift, blocks, proj })
    }

    /// Real parameters held by spectral weights only.
    pub fn spectral_param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.spectral.param_count()).sum()
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor, opts: &ForwardOptions) -> Result<Tensor> {
        let c = &self.config;
        let d = c.dim;
        if x.rank() != d + 2 {
            return Err(shape_err!("FNO expects input [B, C, {d} spatial axes], got {:?}", x.shape()));
        }
        if x.shape()[1] != c.in_channels {
            return Err(shape_err!("FNO expects {} input channels, got {}", c.in_channels, x.shape()[1]));
        }
        let sizes = x.shape()[2..].to_vec();
        let out_sizes = opts.output_sizes.map_or_else(|| sizes.clone(), <[usize]>::to_vec);
        if out_sizes.len() != d || out_sizes.iter().any(|&n| n < 2) {
            return Err(shape_err!("invalid output sizes {out_sizes:?}"));
        }
        let spec = c.mode_spec();
        let padded_out: Vec<usize> = out_sizes.iter().map(|&n| n + pad_amount(n, c.padding_fraction)).collect();
        let padded_in: Vec<usize> = sizes.iter().map(|&n| n + pad_amount(n, c.padding_fraction)).collect();
        spec.check(&padded_in)?;
        spec.check(&padded_out)?;

        let mut h = x.clone();
        if c.positional_embedding {
            h = grid_embedding(tape, &h, d)?;
        }
        h = self.lift.forward_grid(tape, &h)?;
        let (mut h, _) = domain_pad(tape, &h, d, c.padding_fraction)?;
        let last = self.blocks.len() - 1;
        for (l, block) in self.blocks.iter().enumerate() {
            let resample = l == last && padded_out != padded_in;
            let conv_opts = ConvOptions {
                active: opts.active_modes,
                output_sizes: resample.then_some(padded_out.as_slice()),
            };
            let spectral = spectral_conv(tape, &h, &block.spectral, &conv_opts)?;
            let mut skip = block.skip.forward_grid(tape, &h)?;
            if resample {
                skip = tape.spectral_resample(&skip, &padded_out)?;
            }
            h = tape.add(&spectral, &skip)?;
            if l != last {
                h = tape.gelu(&h)?;
            }
        }
        let record = super::grid::PadRecord {
            sizes: out_sizes.clone(),
            pads: padded_out.iter().zip(&out_sizes).map(|(p, n)| p - n).collect(),
        };
        let h = domain_unpad(tape, &h, &record)?;
        self.proj.forward_grid(tape, &h)
    }
}

impl Params for Fno {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("lift", self.lift.params());
        for (l, b) in self.blocks.iter().enumerate() {
            v.extend(spectral_names(&b.spectral).into_iter().zip(b.spectral.tensors()).map(|(n, t)| (format!("blocks.{l}.spectral.{n}"), t)));
            v.extend(prefixed(&format!("blocks.{l}.skip"), b.skip.params()));
        }
        v.extend(prefixed("proj", self.proj.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = prefixed_mut("lift", self.lift.params_mut());
        for (l, b) in self.blocks.iter_mut().enumerate() {
            let names = spectral_names(&b.spectral);
            v.extend(names.into_iter().zip(b.spectral.tensors_mut()).map(|(n, t)| (format!("blocks.{l}.spectral.{n}"), t)));
            v.extend(prefixed_mut(&format!("blocks.{l}.skip"), b.skip.params_mut()));
        }
        v.extend(prefixed_mut("proj", self.proj.params_mut()));
        v
    }
}

fn spectral_names(w: &SpectralWeights) -> Vec<String> {
    if w.is_tucker() {
        let n = w.tensors().len();
        std::iter::once("core".to_string()).chain((0..n - 1).map(|k| format!("factor{k}"))).collect()
    } else {
        vec!["weight".to_string()]
    }
}
