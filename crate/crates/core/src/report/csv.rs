//! CSV emission and parsing for run artifacts.
//!
//! Floats are written with `Display` (shortest exact round-trip form) except
//! where a fixed precision is part of the artifact contract: per-class AUC
//! values are written with 9 decimals so the plot legends can quote the CSV
//! verbatim.

use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, MetricsReport, RocCurve};
use crate::model::ParamCensus;
use crate::train::EpochRow;

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn history_csv(rows: &[EpochRow]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        ));
    }
    out
}

pub fn parse_history_csv(text: &str) -> Result<Vec<EpochRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Data("empty history CSV".into()))?;
    if header != "epoch,train_loss,train_acc,val_loss,val_acc" {
        return Err(Error::Data(format!("unexpected history CSV header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Data(format!("history CSV row {i} has {} fields", fields.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Data(format!("bad number `{s}` in history CSV row {i}")))
        };
        rows.push(EpochRow {
            epoch: fields[0]
                .parse()
                .map_err(|_| Error::Data(format!("bad epoch `{}` in history CSV", fields[0])))?,
            train_loss: num(fields[1])?,
            train_acc: num(fields[2])?,
            val_loss: num(fields[3])?,
            val_acc: num(fields[4])?,
        });
    }
    Ok(rows)
}

pub fn lr_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,lr\n");
    for (i, lr) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{lr}\n"));
    }
    out
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("metric,value\n");
    if let Some(loss) = report.loss {
        out.push_str(&format!("loss,{loss}\n"));
    }
    for (name, value) in [
        ("accuracy", report.accuracy),
        ("precision", report.precision),
        ("recall", report.recall),
        ("specificity", report.specificity),
        ("f1", report.f1),
        ("binary_accuracy_macro", report.binary_accuracy_macro),
        ("macro_precision", report.macro_precision),
        ("macro_recall", report.macro_recall),
        ("macro_specificity", report.macro_specificity),
    ] {
        out.push_str(&format!("{name},{value}\n"));
    }
    out
}

pub fn confusion_csv(cm: &ConfusionMatrix, class_names: &[String]) -> String {
    let mut out = String::from("actual\\predicted");
    for name in class_names {
        out.push(',');
        out.push_str(&quote(name));
    }
    out.push('\n');
    for (i, row) in cm.counts.iter().enumerate() {
        out.push_str(&quote(&class_names[i]));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn confusion_normalized_csv(cm: &ConfusionMatrix, class_names: &[String]) -> String {
    let (rows, _) = cm.normalized();
    let mut out = String::from("actual\\predicted");
    for name in class_names {
        out.push(',');
        out.push_str(&quote(name));
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&quote(&class_names[i]));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn roc_points_csv(roc: &RocCurve, class_names: &[String]) -> String {
    let mut out = String::from("class,fpr,tpr\n");
    for curve in &roc.per_class {
        for &(fpr, tpr) in &curve.points {
            out.push_str(&format!("{},{fpr},{tpr}\n", quote(&class_names[curve.class])));
        }
    }
    out
}

/// Per-class AUC table; values carry exactly 9 decimals, the same format the
/// SVG legend uses.
pub fn roc_auc_csv(roc: &RocCurve, class_names: &[String]) -> String {
    let mut out = String::from("class,auc\n");
    for curve in &roc.per_class {
        out.push_str(&format!("{},{:.9}\n", quote(&class_names[curve.class]), curve.auc));
    }
    out.push_str(&format!("macro,{:.9}\n", roc.macro_auc));
    out
}

pub fn census_csv(census: &ParamCensus) -> String {
    let mut out = String::from("layer,kind,trainable,non_trainable\n");
    for layer in &census.layers {
        out.push_str(&format!(
            "{},{},{},{}\n",
            quote(&layer.name),
            layer.kind,
            layer.trainable,
            layer.non_trainable
        ));
    }
    out.push_str(&format!("total,,{},{}\n", census.trainable, census.non_trainable));
    out
}
