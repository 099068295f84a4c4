use std::fs;
use std::path::Path;

use opnet::data::{generate_dataset, subsample_to, DataProcessor, DatasetFile, DatasetKind, GeneratorParams};
use opnet::format::KeyValues;
use opnet::models::{load_checkpoint, parameter_count, parse_list, save_checkpoint, ForwardOptions, Model};
use opnet::spectral::ModeSpec;
use opnet::training::{
    evaluate_per_sample, h1_per_sample, mean_metric, predict, select_samples, train as run_training, TrainStatus,
    ValidationSet,
};
use opnet::verify::run_selftest;
use opnet::{Tape, Tensor};

use crate::config::{Count, Resolution, RunConfig};
use crate::{CliError, EvalArgs, GenerateArgs, InferArgs, TrainArgs};

const ACTIVE_MODES_KEY: &str = "active_modes";
const RUN_PREFIX: &str = "run.";

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

fn read_dataset(path: &Path) -> Result<DatasetFile, CliError> {
    DatasetFile::read(path).map_err(|e| runtime(format!("cannot read dataset {}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let kind = DatasetKind::parse(&a.kind).map_err(|e| usage(e.to_string()))?;
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let mut p = match kind {
        DatasetKind::Darcy => GeneratorParams::darcy(a.res),
        DatasetKind::Burgers => GeneratorParams::burgers(a.res),
    };
    p.grf.tau = a.grf_tau.unwrap_or(p.grf.tau);
    p.grf.alpha = a.grf_alpha.unwrap_or(p.grf.alpha);
    p.grf.sigma = a.grf_sigma.unwrap_or(p.grf.sigma);
    p.a_hi = a.a_hi.unwrap_or(p.a_hi);
    p.a_lo = a.a_lo.unwrap_or(p.a_lo);
    p.forcing = a.forcing.unwrap_or(p.forcing);
    p.nu = a.nu.unwrap_or(p.nu);
    p.final_time = a.final_time.unwrap_or(p.final_time);
    p.validate().map_err(|e| usage(e.to_string()))?;
    let file = generate_dataset(&p, a.count, a.seed)?;
    let bytes = file.encode()?;
    write(&a.out, &bytes)?;
    println!("wrote {} samples={} bytes={}", a.out.display(), a.count, bytes.len());
    Ok(())
}

/// Grid sizes for `res` on data with spatial sizes `native`.
fn target_sizes(native: &[usize], res: Resolution) -> Vec<usize> {
    match res {
        Resolution::Native => native.to_vec(),
        Resolution::Size(n) => vec![n; native.len()],
    }
}

/// Subsamples `[B, C, n..]` data to `sizes`, rejecting sizes that are not an
/// integer fraction of the stored grid.
fn resample(x: &Tensor, sizes: &[usize]) -> Result<Tensor, CliError> {
    let native = &x.shape()[2..];
    if native == sizes {
        return Ok(x.clone());
    }
    let ok = sizes.len() == native.len()
        && sizes.iter().all(|&s| s > 0)
        && native.iter().zip(sizes).all(|(&n, &s)| n % s == 0)
        && native.iter().zip(sizes).all(|(&n, &s)| n / s == native[0] / sizes[0]);
    if !ok {
        return Err(usage(format!(
            "resolution {sizes:?} is not obtainable by subsampling the stored grid {native:?}"
        )));
    }
    Ok(subsample_to(x, sizes)?)
}

fn range(n: usize, start: usize, count: usize) -> Result<Vec<usize>, CliError> {
    if start + count > n {
        return Err(usage(format!("requested samples {start}..{} but the dataset holds {n}", start + count)));
    }
    Ok((start..start + count).collect())
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| usage(format!("cannot read config {}: {e}", a.config.display())))?;
    let cfg = RunConfig::parse(&text)?;
    let out_dir = a.out.clone().unwrap_or_else(|| cfg.output_dir());
    fs::create_dir_all(&out_dir).map_err(|e| runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    write(&out_dir.join("resolved.cfg"), cfg.resolved_text())?;

    let data = read_dataset(&cfg.data_path())?;
    if let Some(kind) = data.meta.get("kind") {
        if kind != cfg.get("data.kind") {
            return Err(usage(format!("data.kind is {} but the dataset holds {kind} data", cfg.get("data.kind"))));
        }
    }
    let x = data.require("x")?;
    let y = data.require("y")?;
    let total = x.shape()[0];
    let n_test = cfg.n_test()?;
    let n_train = match cfg.n_train()? {
        Count::All => total.checked_sub(n_test).ok_or_else(|| usage(format!("data.n_test={n_test} exceeds {total} samples")))?,
        Count::Exactly(n) => n,
    };
    if n_train == 0 {
        return Err(usage("no training samples"));
    }
    let train_idx = range(total, 0, n_train)?;
    let test_idx = range(total, n_train, n_test)?;
    let native = x.shape()[2..].to_vec();
    let train_sizes = target_sizes(&native, cfg.resolution()?);
    let xt = resample(&select_samples(x, &train_idx)?, &train_sizes)?;
    let yt = resample(&select_samples(y, &train_idx)?, &train_sizes)?;
    let mut validation = Vec::new();
    if n_test > 0 {
        let (xv, yv) = (select_samples(x, &test_idx)?, select_samples(y, &test_idx)?);
        for res in cfg.val_resolutions()? {
            let sizes = target_sizes(&native, res);
            validation.push(ValidationSet::new(resample(&xv, &sizes)?, resample(&yv, &sizes)?)?);
        }
    }

    let model = cfg.model(native.len(), x.shape()[1], y.shape()[1])?;
    let mut processor = cfg.processor()?;
    processor.fit(&xt, &yt)?;
    let tc = cfg.train_config()?;
    let mut print = |r: &opnet::training::EpochRecord| {
        let mut line = format!("epoch {} train_loss {} lr {}", r.epoch, r.train_loss, r.lr);
        for (set, v) in validation.iter().zip(&r.val) {
            line.push_str(&format!(" val_relL2@{} {v}", set.label));
        }
        println!("{line}");
    };
    let outcome = run_training(model, &processor, &xt, &yt, &validation, &tc, &mut print)?;

    let mut meta: KeyValues = cfg.to_kv().into_iter().map(|(k, v)| (format!("{RUN_PREFIX}{k}"), v)).collect();
    if let Some(m) = &outcome.active_modes {
        meta.insert(ACTIVE_MODES_KEY.into(), m.modes().iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    }
    let extras = processor.to_extras()?;
    write(&out_dir.join("report.csv"), outcome.report.to_csv())?;
    let summary = outcome.report.summary(&cfg.to_kv(), parameter_count(&outcome.model));
    let json = serde_json::to_string_pretty(&summary).map_err(|e| runtime(e.to_string()))?;
    write(&out_dir.join("summary.json"), json + "\n")?;
    match outcome.status {
        TrainStatus::Completed => {
            let path = out_dir.join("model.nock");
            save_checkpoint(&path, &outcome.model, &extras, &meta)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        TrainStatus::Aborted { epoch, reason } => {
            let path = out_dir.join("model.partial.nock");
            save_checkpoint(&path, &outcome.model, &extras, &meta)?;
            Err(runtime(format!("training aborted in epoch {epoch}: {reason}; last good parameters in {}", path.display())))
        }
    }
}

struct Loaded {
    model: Model,
    processor: DataProcessor,
    active: Option<ModeSpec>,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let c = load_checkpoint(path).map_err(|e| runtime(format!("cannot load checkpoint {}: {e}", path.display())))?;
    let processor = DataProcessor::from_extras(&c.extras)?;
    let active = match c.meta.get(ACTIVE_MODES_KEY) {
        Some(s) => Some(ModeSpec::new(parse_list(s)?)?),
        None => None,
    };
    Ok(Loaded { model: c.model, processor, active })
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let m = load(&a.checkpoint)?;
    let data = read_dataset(&a.data)?;
    let x = data.require("x").map_err(|e| usage(e.to_string()))?;
    let y = data.require("y").map_err(|e| usage(e.to_string()))?;
    let total = x.shape()[0];
    let count = a.count.unwrap_or(total.saturating_sub(a.skip));
    if count == 0 {
        return Err(usage("no samples selected"));
    }
    let idx = range(total, a.skip, count)?;
    let (x, y) = (select_samples(x, &idx)?, select_samples(y, &idx)?);
    let native = x.shape()[2..].to_vec();
    let resolutions: Vec<Resolution> =
        if a.res.is_empty() { vec![Resolution::Native] } else { a.res.iter().map(|&n| Resolution::Size(n)).collect() };
    for res in resolutions {
        let sizes = target_sizes(&native, res);
        let (xs, ys) = (resample(&x, &sizes)?, resample(&y, &sizes)?);
        let rel = mean_metric(&evaluate_per_sample(&m.model, &m.processor, &xs, &ys, m.active.as_ref())?);
        let mut line = format!("res={} relL2={rel}", opnet::training::resolution_label(&sizes));
        if a.h1 {
            let active = opnet::training::effective_active(&m.model, m.active.as_ref());
            let opts = ForwardOptions { output_sizes: None, active_modes: active.as_ref() };
            let pred = predict(&m.model, &m.processor, &xs, &opts)?;
            let h1 = h1_per_sample(&Tape::new(), &pred, &ys, sizes.len())?;
            line.push_str(&format!(" h1={}", mean_metric(h1.real_values()?)));
        }
        println!("{line}");
    }
    Ok(())
}

pub fn infer(a: &InferArgs) -> Result<(), CliError> {
    let m = load(&a.checkpoint)?;
    let data = read_dataset(&a.input)?;
    let x = data.require("x").map_err(|e| usage(e.to_string()))?;
    let d = x.rank().saturating_sub(2);
    if d != m.model.dim() || x.shape()[1] != m.model.in_channels() {
        return Err(usage(format!("input {:?} does not fit a {d}-D model with {} input channels", x.shape(), m.model.in_channels())));
    }
    let sizes = match a.res.len() {
        0 => x.shape()[2..].to_vec(),
        1 => vec![a.res[0]; d],
        n if n == d => a.res.clone(),
        n => return Err(usage(format!("--res gives {n} sizes for {d} axes"))),
    };
    let active = opnet::training::effective_active(&m.model, m.active.as_ref());
    let opts = ForwardOptions {
        output_sizes: (sizes != x.shape()[2..]).then_some(sizes.as_slice()),
        active_modes: active.as_ref(),
    };
    let pred = predict(&m.model, &m.processor, x, &opts)?;
    let mut meta = KeyValues::new();
    meta.insert("count".into(), pred.shape()[0].to_string());
    if sizes.windows(2).all(|w| w[0] == w[1]) {
        meta.insert("resolution".into(), sizes[0].to_string());
    }
    let file = DatasetFile { meta, tensors: vec![("y_pred".into(), pred)] };
    let bytes = file.encode()?;
    write(&a.out, &bytes)?;
    println!("wrote {} samples={} sizes={sizes:?} bytes={}", a.out.display(), x.shape()[0], bytes.len());
    Ok(())
}

pub fn selftest() -> Result<(), CliError> {
    let results = run_selftest()?;
    let mut failed = 0;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {} value={:e} tolerance={:e}", r.name, r.value, r.tolerance);
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(runtime(format!("{failed} of {} checks failed", results.len())));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}
