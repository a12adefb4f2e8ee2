//! Whole-split model evaluation and cross-fold aggregation.

use serde::{Deserialize, Serialize};

use crate::engine::ops::act::{argmax_rows, softmax_rows};
use crate::engine::scalar::Scalar;
use crate::engine::tape::Tape;
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};
use crate::eval::confusion::{confusion_matrix, ConfusionMatrix};
use crate::eval::metrics::{metrics_from_cm, MetricsReport};
use crate::eval::roc::{roc_auc, RocCurve};
use crate::model::graph::Model;

#[derive(Clone, Debug, Serialize)]
pub struct Evaluation {
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub roc: RocCurve,
    /// Argmax prediction per evaluated sample, in `indices` order.
    pub predictions: Vec<usize>,
}

/// Evaluate `model` on the samples selected by `indices`, in inference mode
/// (batch norm reads running statistics; nothing is mutated).
pub fn evaluate_split<S: Scalar>(
    model: &Model<S>,
    images: &[Tensor<S>],
    labels: &[usize],
    indices: &[usize],
    batch_size: usize,
) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::invalid("evaluate_split", "empty split"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("evaluate_split", "batch_size must be at least 1"));
    }
    let k = model.num_classes();
    let mut actual = Vec::with_capacity(indices.len());
    let mut predictions = Vec::with_capacity(indices.len());
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(indices.len());
    let mut loss_sum = 0.0f64;

    for chunk in indices.chunks(batch_size) {
        let batch: Vec<&Tensor<S>> = chunk.iter().map(|&i| &images[i]).collect();
        let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
        let x = Tensor::stack(&batch)?;
        let mut tape = Tape::inference();
        let out = model.forward_eval(&mut tape, &x)?;
        let loss_id = tape.softmax_cross_entropy(out, &batch_labels)?;
        let batch_loss = tape.value(loss_id).data()[0].to_f64();
        if !batch_loss.is_finite() {
            return Err(Error::NonFinite { what: "loss", name: "evaluate_split".into() });
        }
        loss_sum += batch_loss * chunk.len() as f64;

        let logits = tape.value(out);
        predictions.extend(argmax_rows(logits)?);
        let probs = softmax_rows(logits)?;
        for row in 0..chunk.len() {
            scores.push(probs.data()[row * k..(row + 1) * k].iter().map(|&v| Scalar::to_f64(v)).collect());
        }
        actual.extend(batch_labels);
    }

    let confusion = confusion_matrix(&actual, &predictions, k)?;
    let mut metrics = metrics_from_cm(&confusion)?;
    metrics.loss = Some(loss_sum / indices.len() as f64);
    let roc = roc_auc(&scores, &actual)?;
    Ok(Evaluation { metrics, confusion, roc, predictions })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

fn mean_sd(values: &[f64]) -> MeanSd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanSd { mean, sd: var.sqrt() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub folds: usize,
    pub accuracy: MeanSd,
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub specificity: MeanSd,
    pub f1: MeanSd,
    pub binary_accuracy_macro: MeanSd,
    /// Present when every report carried a loss.
    pub loss: Option<MeanSd>,
}

/// Mean and population standard deviation of each metric across folds.
pub fn aggregate_folds(reports: &[MetricsReport]) -> Result<AggregateMetrics> {
    if reports.is_empty() {
        return Err(Error::invalid("aggregate_folds", "no fold reports"));
    }
    let collect = |f: fn(&MetricsReport) -> f64| -> MeanSd {
        mean_sd(&reports.iter().map(f).collect::<Vec<_>>())
    };
    let losses: Vec<f64> = reports.iter().filter_map(|r| r.loss).collect();
    Ok(AggregateMetrics {
        folds: reports.len(),
        accuracy: collect(|r| r.accuracy),
        precision: collect(|r| r.precision),
        recall: collect(|r| r.recall),
        specificity: collect(|r| r.specificity),
        f1: collect(|r| r.f1),
        binary_accuracy_macro: collect(|r| r.binary_accuracy_macro),
        loss: if losses.len() == reports.len() { Some(mean_sd(&losses)) } else { None },
    })
}
