use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Per-iteration telemetry; statistics are taken before alignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub epoch: usize,
    pub iter: usize,
    pub loss_orig: f64,
    pub loss_aug: f64,
    pub grad_norm_orig: f64,
    pub grad_norm_aug: f64,
    pub cosine: f64,
    pub conflict: bool,
    pub alignment_applied: bool,
}

/// Per-epoch aggregates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub iters: usize,
    pub conflict_count: usize,
    pub train_loss_mean_orig: f64,
    pub train_loss_mean_aug: f64,
    pub val_loss: f64,
    pub val_eer: f64,
}

/// Fixed 17-significant-digit formatting so reruns are byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const ITERATION_COLUMNS: [&str; 9] = [
    "epoch",
    "iter",
    "loss_orig",
    "loss_aug",
    "grad_norm_orig",
    "grad_norm_aug",
    "cosine",
    "conflict",
    "alignment_applied",
];

pub const EPOCH_COLUMNS: [&str; 7] =
    ["epoch", "iters", "conflict_count", "train_loss_mean_orig", "train_loss_mean_aug", "val_loss", "val_eer"];

pub fn write_iterations(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ITERATION_COLUMNS)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.iter.to_string(),
            fmt_f64(r.loss_orig),
            fmt_f64(r.loss_aug),
            fmt_f64(r.grad_norm_orig),
            fmt_f64(r.grad_norm_aug),
            fmt_f64(r.cosine),
            r.conflict.to_string(),
            r.alignment_applied.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_epochs(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EPOCH_COLUMNS)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.iters.to_string(),
            r.conflict_count.to_string(),
            fmt_f64(r.train_loss_mean_orig),
            fmt_f64(r.train_loss_mean_aug),
            fmt_f64(r.val_loss),
            fmt_f64(r.val_eer),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_iterations(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_epochs(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
