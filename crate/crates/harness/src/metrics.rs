//! Per-iteration metrics rows and their CSV form.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub const METRICS_HEADER: &str = "iter,epoch,split,loss,grad_norm,lr,elapsed_ms";

/// Loss above which a run is treated as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e12;

pub const SPLIT_TRAIN: &str = "train";
pub const SPLIT_DIVERGED: &str = "diverged";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub iter: usize,
    pub epoch: f64,
    pub split: &'static str,
    pub loss: f64,
    pub grad_norm: f64,
    pub lr: f64,
    pub elapsed_ms: u64,
}

impl MetricsRow {
    pub fn is_diverged(&self) -> bool {
        self.split == SPLIT_DIVERGED
    }
}

pub fn is_divergent(loss: f64) -> bool {
    !(loss <= DIVERGENCE_LOSS)
}

pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    // the header is written explicitly so that an empty run still carries it
    out.write_record(METRICS_HEADER.split(','))?;
    for r in rows {
        out.write_record(&[
            r.iter.to_string(),
            r.epoch.to_string(),
            r.split.to_string(),
            r.loss.to_string(),
            r.grad_norm.to_string(),
            r.lr.to_string(),
            r.elapsed_ms.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_metrics_file(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_metrics(std::io::BufWriter::new(f), rows)
}
