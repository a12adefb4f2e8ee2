//! Fold training loop and cross-validation orchestration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::ops::act::argmax_rows;
use crate::engine::scalar::Scalar;
use crate::engine::tape::Tape;
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};
use crate::eval::evaluate::{aggregate_folds, evaluate_split, AggregateMetrics, Evaluation};
use crate::model::checkpoint::{load_partial, TransferReport};
use crate::model::graph::Model;
use crate::train::augment::{apply_augment, draw_augment};
use crate::train::clr::{weight_decay_for_epoch, ClrSchedule};
use crate::train::config::TrainConfig;
use crate::train::folds::{make_folds, FoldPlan};
use crate::train::sgd::Sgd;

/// One epoch of history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub rows: Vec<EpochRow>,
    /// Learning rate of every optimizer iteration, in order.
    pub lr_trace: Vec<f64>,
    /// Epoch with the highest validation accuracy (earliest on ties); None
    /// for a zero-epoch run.
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: f64,
}

/// A trained fold: the history and the model restored to its best epoch.
pub struct FoldResult<S> {
    pub history: TrainHistory,
    pub model: Model<S>,
}

/// Deterministic stream splitting: one base seed fans out into independent
/// sub-seeds for model init, shuffling, and augmentation.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    fn splitmix64(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(splitmix64(splitmix64(base) ^ tag) ^ index)
}

/// Partial weight transfer: copy every checkpoint parameter whose name and
/// shape match, report the rest. The DenseNet backbone of NemaNet shares its
/// names with a plain DenseNet-121, so a backbone checkpoint initializes
/// exactly that subgraph.
pub fn transfer_init<S: Scalar>(
    model: &mut Model<S>,
    checkpoint: impl AsRef<std::path::Path>,
) -> Result<TransferReport> {
    load_partial(model, checkpoint)
}

fn stack_batch<S: Scalar>(
    images: &[Tensor<S>],
    chunk: &[usize],
    cfg: &TrainConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<S>> {
    match rng {
        Some(rng) => {
            let mut augmented = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let draw = draw_augment(rng, cfg.augment_mirror, cfg.augment_flip, cfg.augment_rotate);
                augmented.push(apply_augment(&images[i], draw)?);
            }
            Tensor::stack(&augmented.iter().collect::<Vec<_>>())
        }
        None => Tensor::stack(&chunk.iter().map(|&i| &images[i]).collect::<Vec<_>>()),
    }
}

/// Mean loss and top-1 accuracy over a split, inference mode, no artifacts.
fn validate_split<S: Scalar>(
    model: &Model<S>,
    images: &[Tensor<S>],
    labels: &[usize],
    indices: &[usize],
    batch_size: usize,
    cfg: &TrainConfig,
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in indices.chunks(batch_size) {
        let x = stack_batch(images, chunk, cfg, None)?;
        let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
        let mut tape = Tape::inference();
        let out = model.forward_eval(&mut tape, &x)?;
        let loss_id = tape.softmax_cross_entropy(out, &batch_labels)?;
        loss_sum += tape.value(loss_id).data()[0].to_f64() * chunk.len() as f64;
        correct += argmax_rows(tape.value(out))?
            .iter()
            .zip(&batch_labels)
            .filter(|(p, l)| p == l)
            .count();
    }
    let n = indices.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Train one fold: shuffled augmented mini-batches under the cyclic
/// schedule, per-epoch validation, and best-checkpoint restoration.
///
/// `build` receives a derived seed and must return a fresh (optionally
/// transfer-initialized) model.
pub fn train_fold<S: Scalar>(
    build: &(dyn Fn(u64) -> Result<Model<S>> + Sync),
    images: &[Tensor<S>],
    labels: &[usize],
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
    fold_seed: u64,
) -> Result<FoldResult<S>> {
    cfg.validate()?;
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::invalid("train_fold", "training and validation splits must be non-empty"));
    }
    let mut model = build(derive_seed(fold_seed, 1, 0))?;
    let mut sgd = Sgd::new(&model, cfg.momentum)?;

    let batches_per_epoch = train_idx.len().div_ceil(cfg.batch_size);
    let total_iterations = cfg.epochs * batches_per_epoch;
    let mut schedule = ClrSchedule::new(cfg.lr_base, cfg.lr_peak, cfg.clr_step_size)?;
    if cfg.clr_decay && total_iterations > 0 {
        schedule = schedule.with_decay(cfg.lr_final, total_iterations)?;
    }

    let mut history = TrainHistory::default();
    history.best_val_accuracy = f64::NEG_INFINITY;
    let mut best_params: Option<Vec<Vec<S>>> = None;
    let mut iteration = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order = train_idx.to_vec();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(fold_seed, 2, epoch as u64));
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut shuffle_rng);
        let mut augment_rng = ChaCha8Rng::seed_from_u64(derive_seed(fold_seed, 3, epoch as u64));

        let mut train_loss_sum = 0.0;
        let mut train_correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let x = stack_batch(images, chunk, cfg, Some(&mut augment_rng))?;
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();

            let mut tape = Tape::new();
            let pass = model.forward_train(&mut tape, &x)?;
            let loss_id = tape.softmax_cross_entropy(pass.output, &batch_labels)?;
            let loss = tape.value(loss_id).data()[0].to_f64();
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "loss",
                    name: format!("epoch {epoch}, iteration {iteration}"),
                });
            }
            train_loss_sum += loss * chunk.len() as f64;
            train_correct += argmax_rows(tape.value(pass.output))?
                .iter()
                .zip(&batch_labels)
                .filter(|(p, l)| p == l)
                .count();

            tape.backward(loss_id)?;
            let grads: Vec<_> = pass
                .bindings
                .iter()
                .map(|&(pid, tid)| (pid, tape.take_grad(tid).expect("trainable leaf has gradient")))
                .collect();
            let lr = schedule.lr(iteration);
            let wd = weight_decay_for_epoch(cfg.weight_decay_start, cfg.weight_decay_end, epoch, cfg.epochs);
            sgd.step(&mut model, &grads, lr, wd)?;
            history.lr_trace.push(lr);
            iteration += 1;
        }

        let (val_loss, val_acc) = validate_split(&model, images, labels, val_idx, cfg.batch_size, cfg)?;
        history.rows.push(EpochRow {
            epoch,
            train_loss: train_loss_sum / train_idx.len() as f64,
            train_acc: train_correct as f64 / train_idx.len() as f64,
            val_loss,
            val_acc,
        });
        if val_acc > history.best_val_accuracy {
            history.best_val_accuracy = val_acc;
            history.best_epoch = Some(epoch);
            best_params = Some(
                model.params().iter().map(|(_, p)| p.value.data().to_vec()).collect(),
            );
        }
    }

    if let Some(snapshot) = best_params {
        for (id, values) in snapshot.iter().enumerate() {
            model.params_mut().get_mut(id).value.data_mut().copy_from_slice(values);
        }
    }
    if history.best_val_accuracy == f64::NEG_INFINITY {
        history.best_val_accuracy = f64::NAN;
    }
    Ok(FoldResult { history, model })
}

/// Per-fold outcome of a cross-validation run. Failures are carried, not
/// propagated, so remaining folds still run.
pub enum FoldOutcome<S> {
    Completed { result: FoldResult<S>, evaluation: Evaluation },
    Failed { error: String },
}

pub struct FoldReport<S> {
    pub fold: usize,
    pub outcome: FoldOutcome<S>,
}

pub struct CrossValidation<S> {
    pub plan: FoldPlan,
    pub reports: Vec<FoldReport<S>>,
    /// Aggregate over completed folds; None when every fold failed.
    pub aggregate: Option<AggregateMetrics>,
}

/// Run k-fold cross-validation. With `cfg.folds == 1` a single 80/20
/// stratified holdout is trained (one fold of a 5-fold plan). With
/// `parallel`, folds run concurrently; seeds are per-fold either way, so the
/// results are identical to the serial order.
pub fn run_cross_validation<S: Scalar>(
    build: &(dyn Fn(u64) -> Result<Model<S>> + Sync),
    images: &[Tensor<S>],
    labels: &[usize],
    class_names: &[String],
    cfg: &TrainConfig,
    parallel: bool,
) -> Result<CrossValidation<S>> {
    cfg.validate()?;
    let plan_k = if cfg.folds == 1 { 5 } else { cfg.folds };
    let plan = make_folds(labels, class_names, plan_k, cfg.seed)?;
    let folds_to_run = if cfg.folds == 1 { 1 } else { plan_k };

    let run_one = |fold: usize| -> FoldReport<S> {
        let train_idx = plan.train_indices(fold);
        let val_idx = plan.val_indices(fold);
        let fold_seed = derive_seed(cfg.seed, 100, fold as u64);
        let outcome = (|| -> Result<FoldOutcome<S>> {
            let result = train_fold(build, images, labels, &train_idx, val_idx, cfg, fold_seed)?;
            let evaluation = evaluate_split(&result.model, images, labels, val_idx, cfg.batch_size)?;
            Ok(FoldOutcome::Completed { result, evaluation })
        })()
        .unwrap_or_else(|e| FoldOutcome::Failed { error: e.to_string() });
        FoldReport { fold, outcome }
    };

    let reports: Vec<FoldReport<S>> = if parallel {
        use rayon::prelude::*;
        (0..folds_to_run).into_par_iter().map(run_one).collect()
    } else {
        (0..folds_to_run).map(run_one).collect()
    };

    let completed: Vec<_> = reports
        .iter()
        .filter_map(|r| match &r.outcome {
            FoldOutcome::Completed { evaluation, .. } => Some(evaluation.metrics.clone()),
            FoldOutcome::Failed { .. } => None,
        })
        .collect();
    let aggregate = if completed.is_empty() { None } else { Some(aggregate_folds(&completed)?) };
    Ok(CrossValidation { plan, reports, aggregate })
}
