//! `metrics.json` documents and `confusion.csv`.
//!
//! Documents carry no timestamps or durations so that identical runs
//! produce identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vscnn_core::eval::{ConfusionMatrix, EvalReport};
use vscnn_core::train::TrainingLog;

use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: String,
    pub channel: Option<usize>,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
    pub samples: usize,
    pub train_accuracy: f64,
    pub epochs: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

impl TrainMetrics {
    pub fn epochs_from(log: &TrainingLog) -> Vec<EpochRecord> {
        log.epochs
            .iter()
            .map(|e| EpochRecord { stage: e.stage.as_str().into(), channel: e.channel, epoch: e.epoch, loss: e.loss })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRecord {
    pub label: String,
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub protocol: String,
    pub config_hash: String,
    pub overall_accuracy: f64,
    pub mean_accuracy: f64,
    pub breakdown: Vec<BreakdownRecord>,
    pub view_matrix: Option<Vec<Vec<f64>>>,
    pub mean_with_diagonal: Option<f64>,
    pub mean_without_diagonal: Option<f64>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub classes: usize,
    /// Row-major `confusion[true][pred]`.
    pub confusion: Vec<Vec<u64>>,
    pub warnings: Vec<String>,
}

impl EvalMetrics {
    pub fn from_report(r: &EvalReport, config_hash: &str) -> Self {
        let c = &r.confusion;
        Self {
            protocol: r.protocol.as_str().into(),
            config_hash: config_hash.into(),
            overall_accuracy: r.overall_accuracy,
            mean_accuracy: r.mean_accuracy,
            breakdown: r
                .breakdown
                .iter()
                .map(|b| BreakdownRecord {
                    label: b.label.clone(),
                    correct: b.correct,
                    total: b.total,
                    accuracy: b.accuracy(),
                })
                .collect(),
            view_matrix: r.view_matrix.map(|m| m.iter().map(|row| row.to_vec()).collect()),
            mean_with_diagonal: r.mean_with_diagonal,
            mean_without_diagonal: r.mean_without_diagonal,
            train_samples: r.train_samples,
            test_samples: r.test_samples,
            classes: c.classes,
            confusion: c.counts.chunks(c.classes.max(1)).map(<[u64]>::to_vec).collect(),
            warnings: r.warnings.clone(),
        }
    }

    pub fn confusion_matrix(&self) -> Result<ConfusionMatrix> {
        let mut m = ConfusionMatrix::new(self.classes);
        if self.confusion.len() != self.classes || self.confusion.iter().any(|r| r.len() != self.classes) {
            return Err(Error::data("confusion matrix shape does not match the class count"));
        }
        m.counts = self.confusion.concat();
        Ok(m)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::data(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_eval_metrics(path: &Path) -> Result<EvalMetrics> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Header `true\pred,0,1,…`, one row per true class.
pub fn write_confusion_csv(path: &Path, m: &ConfusionMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::data(e.to_string());
    let mut header = vec!["true\\pred".to_string()];
    header.extend((0..m.classes).map(|c| c.to_string()));
    w.write_record(&header).map_err(err)?;
    for t in 0..m.classes {
        let mut row = vec![t.to_string()];
        row.extend((0..m.classes).map(|p| m.get(t, p).to_string()));
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::data(e.to_string()))?;
    write_atomic(path, &bytes)
}
