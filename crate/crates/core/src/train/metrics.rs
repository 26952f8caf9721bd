use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ExperimentSummary, TrainReport};
use crate::error::{Error, Result};

/// `epoch,train_loss,valid_loss,valid_acc,seconds`, one row per epoch.
pub fn write_metrics_csv(path: impl AsRef<Path>, report: &TrainReport) -> Result<()> {
    let mut out = String::from("epoch,train_loss,valid_loss,valid_acc,seconds\n");
    for e in &report.epochs {
        writeln!(
            out,
            "{},{},{},{},{:.6}",
            e.epoch, e.train_loss, e.valid_loss, e.valid_accuracy, e.seconds
        )
        .expect("write to String");
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `seed,test_acc,best_epoch`, one row per run. Contains no timings, so
/// identical runs produce identical files.
pub fn write_summary_csv(path: impl AsRef<Path>, summary: &ExperimentSummary) -> Result<()> {
    let mut out = String::from("seed,test_acc,best_epoch\n");
    for r in &summary.runs {
        writeln!(out, "{},{},{}", r.seed, r.test_accuracy, r.best_epoch).expect("write to String");
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
