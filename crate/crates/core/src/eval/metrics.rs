//! Classification metrics from a confusion matrix. Primary metrics use
//! micro aggregation: per-class tp/fp/tn/fn tallies are summed across
//! classes before the single division, so each value is one exact integer
//! ratio evaluated in f64.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::confusion::ConfusionMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean cross-entropy; absent when the report was derived from counts
    /// alone.
    pub loss: Option<f64>,
    /// Top-1 accuracy: diagonal sum / total.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Mean over classes of the one-vs-rest binary accuracy
    /// (tp + tn) / total.
    pub binary_accuracy_macro: f64,
    /// Macro (per-class averaged) variants; classes with an undefined ratio
    /// are skipped.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_specificity: f64,
    pub per_class: Vec<ClassTally>,
}

/// Per-class one-vs-rest tallies of a confusion matrix.
pub fn class_tallies(cm: &ConfusionMatrix) -> Vec<ClassTally> {
    let total = cm.total();
    (0..cm.n_classes)
        .map(|i| {
            let tp = cm.counts[i][i];
            let fp = cm.col_sum(i) - tp;
            let fn_ = cm.row_sum(i) - tp;
            let tn = total - tp - fp - fn_;
            ClassTally { tp, fp, tn, fn_ }
        })
        .collect()
}

pub fn metrics_from_cm(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("metrics_from_cm", "confusion matrix has no samples"));
    }
    let per_class = class_tallies(cm);
    let sum = |f: fn(&ClassTally) -> usize| per_class.iter().map(f).sum::<usize>();
    let tp = sum(|t| t.tp);
    let fp = sum(|t| t.fp);
    let tn = sum(|t| t.tn);
    let fn_ = sum(|t| t.fn_);

    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    let specificity = tn as f64 / (tn + fp) as f64;
    let f1 = 2.0 * (precision * recall) / (precision + recall);
    let accuracy = tp as f64 / total as f64;
    let binary_accuracy_macro = per_class
        .iter()
        .map(|t| (t.tp + t.tn) as f64 / total as f64)
        .sum::<f64>()
        / cm.n_classes as f64;

    let macro_mean = |num: fn(&ClassTally) -> usize, den: fn(&ClassTally) -> usize| {
        let defined: Vec<f64> = per_class
            .iter()
            .filter(|t| den(t) > 0)
            .map(|t| num(t) as f64 / den(t) as f64)
            .collect();
        if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        }
    };

    Ok(MetricsReport {
        loss: None,
        accuracy,
        precision,
        recall,
        specificity,
        f1,
        binary_accuracy_macro,
        macro_precision: macro_mean(|t| t.tp, |t| t.tp + t.fp),
        macro_recall: macro_mean(|t| t.tp, |t| t.tp + t.fn_),
        macro_specificity: macro_mean(|t| t.tn, |t| t.tn + t.fp),
        per_class,
    })
}
