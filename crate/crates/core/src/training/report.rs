use serde_json::{json, Map, Value};

use crate::format::KeyValues;

/// Metrics of one finished epoch. `epoch` counts from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub lr: f64,
    /// Active Fourier modes per axis; empty for models without them.
    pub active_modes: Vec<usize>,
    pub wall_ms: u64,
    /// Relative L2 per validation resolution, in the order of the labels.
    pub val: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Validation resolution labels such as `32` or `32x16`.
    pub labels: Vec<String>,
    pub records: Vec<EpochRecord>,
}

/// `n` for square grids, otherwise the sizes joined by `x`.
pub fn resolution_label(sizes: &[usize]) -> String {
    if sizes.windows(2).all(|w| w[0] == w[1]) && !sizes.is_empty() {
        sizes[0].to_string()
    } else {
        modes_label(sizes)
    }
}

fn modes_label(m: &[usize]) -> String {
    if m.is_empty() {
        return "-".into();
    }
    m.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

impl TrainReport {
    pub fn header(&self) -> String {
        let mut h = String::from("epoch,train_loss,lr,active_modes,wall_ms");
        for l in &self.labels {
            h.push_str(&format!(",val_relL2@{l}"));
        }
        h
    }

    pub fn csv_row(r: &EpochRecord) -> String {
        let mut s = format!("{},{},{},{},{}", r.epoch, r.train_loss, r.lr, modes_label(&r.active_modes), r.wall_ms);
        for v in &r.val {
            s.push_str(&format!(",{v}"));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.records {
            out.push_str(&TrainReport::csv_row(r));
            out.push('\n');
        }
        out
    }

    /// Epoch with the lowest validation error at the first resolution
    /// (earliest on ties).
    pub fn best_epoch(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in &self.records {
            let Some(&v) = r.val.first() else { continue };
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((r.epoch, v));
            }
        }
        best.map(|(e, _)| e)
    }

    /// Summary document: resolved configuration, best epoch, final metrics
    /// and parameter count.
    pub fn summary(&self, config: &KeyValues, parameter_count: usize) -> Value {
        let cfg: Map<String, Value> = config.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let mut finals = Map::new();
        if let Some(last) = self.records.last() {
            finals.insert("train_loss".into(), json!(last.train_loss));
            for (l, v) in self.labels.iter().zip(&last.val) {
                finals.insert(format!("val_relL2@{l}"), json!(v));
            }
        }
        json!({
            "config": cfg,
            "best_epoch": self.best_epoch(),
            "final_metrics": finals,
            "parameter_count": parameter_count,
        })
    }
}
