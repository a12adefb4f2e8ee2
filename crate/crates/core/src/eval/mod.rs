//! Evaluation: confusion matrices, micro-aggregated metrics, one-vs-rest
//! ROC-AUC, whole-split model evaluation, and cross-fold aggregation.

pub mod confusion;
pub mod evaluate;
pub mod metrics;
pub mod roc;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use evaluate::{aggregate_folds, evaluate_split, AggregateMetrics, Evaluation, MeanSd};
pub use metrics::{class_tallies, metrics_from_cm, ClassTally, MetricsReport};
pub use roc::{roc_auc, ClassRoc, RocCurve};
