//! Confusion-matrix evaluation: accuracy, balanced accuracy, macro F1, and
//! per-class F1. Zero-support classes are excluded from balanced accuracy and
//! macro F1 rather than counted as zero.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{CoreError, Result};
use crate::model::{forward, ModelSpec};
use crate::params::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Rows = true class, columns = predicted class.
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub support: Vec<u64>,
}

/// Evaluate with argmax prediction (ties break to the lowest class index).
pub fn evaluate(spec: &ModelSpec, w: &ParamVector, ds: &LabeledDataset) -> Result<MetricsReport> {
    if ds.is_empty() {
        return Err(CoreError::EmptyInput("evaluate dataset"));
    }
    let c = spec.num_classes;
    let mut confusion = vec![vec![0u64; c]; c];
    for i in 0..ds.len() {
        let y = ds.label(i);
        if y >= c {
            return Err(CoreError::LabelOutOfRange {
                label: y,
                num_classes: c,
            });
        }
        let probs = forward(spec, w, ds.feature(i))?;
        let pred = argmax(&probs);
        confusion[y][pred] += 1;
    }
    Ok(report_from_confusion(confusion))
}

/// Lowest index among maximal entries.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Derive all scalar metrics from a confusion matrix.
pub fn report_from_confusion(confusion: Vec<Vec<u64>>) -> MetricsReport {
    let c = confusion.len();
    let support: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();
    let total: u64 = support.iter().sum();
    let correct: u64 = (0..c).map(|k| confusion[k][k]).sum();
    let accuracy = correct as f64 / total as f64;

    let mut recall_sum = 0.0;
    let mut present = 0usize;
    let mut per_class_f1 = vec![0.0; c];
    let mut f1_sum = 0.0;
    for k in 0..c {
        let tp = confusion[k][k] as f64;
        let fn_ = (support[k] - confusion[k][k]) as f64;
        let fp: f64 = (0..c).filter(|&r| r != k).map(|r| confusion[r][k] as f64).sum();
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if support[k] > 0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class_f1[k] = f1;
        if support[k] > 0 {
            recall_sum += recall;
            f1_sum += f1;
            present += 1;
        }
    }
    let balanced_accuracy = recall_sum / present as f64;
    let macro_f1 = f1_sum / present as f64;

    MetricsReport {
        confusion,
        accuracy,
        balanced_accuracy,
        macro_f1,
        per_class_f1,
        support,
    }
}
