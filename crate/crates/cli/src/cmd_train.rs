//! `nemakit train`: cross-validated training producing a report bundle.
//!
//! Bundle layout under `--out`:
//!
//! ```text
//! out/
//!   config.json            effective configuration of the run
//!   manifest.json          scanned dataset manifest (with checksum)
//!   fold_plan.json         stratified fold assignment
//!   transfer_report.json   (with --transfer) matched/skipped parameter names
//!   summary.json           per-fold and aggregate results, wall time
//!   fold_<i>/
//!     history.csv          per-epoch loss/accuracy
//!     lr_trace.csv         learning rate at every optimizer step
//!     curves.svg           training curves rendered from the history
//!     evaluation.json      metrics + confusion + ROC for the held-out fold
//!     metrics.csv, confusion.csv, confusion_normalized.csv
//!     roc_points.csv, roc_auc.csv, confusion.svg, roc.svg
//!     best.nema            checkpoint of the best-validation-accuracy epoch
//!     error.txt            (only if the fold failed)
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Args;
use nemakit::data::{load_dataset, scan_dataset, LoadOptions};
use nemakit::eval::Evaluation;
use nemakit::model::{build_by_name, save_checkpoint, Model};
use nemakit::report::{
    confusion_csv, confusion_heatmap_svg, confusion_normalized_csv, curves_svg, history_csv,
    lr_trace_csv, metrics_csv, roc_auc_csv, roc_points_csv, roc_svg,
};
use nemakit::train::{run_cross_validation, transfer_init, FoldOutcome, FoldResult};

use crate::common::{resolve_config, write_file};

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset root: one subdirectory per class containing images.
    #[arg(long)]
    pub data: PathBuf,

    /// JSON config file; embedded defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Override the configured architecture ("nemanet" or "densenet121").
    #[arg(long)]
    pub model: Option<String>,

    /// Override the configured fold count (1 = single stratified holdout).
    #[arg(long)]
    pub folds: Option<usize>,

    /// Override the configured input size.
    #[arg(long)]
    pub input_size: Option<usize>,

    /// Checkpoint whose parameters initialize every fold's model where the
    /// name and shape match (transfer learning); the rest stay random.
    #[arg(long)]
    pub transfer: Option<PathBuf>,

    /// Output directory for the report bundle.
    #[arg(long)]
    pub out: PathBuf,

    /// Train folds on worker threads instead of sequentially.
    #[arg(long)]
    pub parallel_folds: bool,
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let cfg = resolve_config(
        args.config.as_deref(),
        args.model.as_deref(),
        args.folds,
        args.input_size,
    )?;
    if !args.data.is_dir() {
        bail!("data directory {} does not exist", args.data.display());
    }

    let scanned = scan_dataset(&args.data)?;
    for warning in &scanned.warnings {
        eprintln!("warning: {warning}");
    }
    let manifest = scanned.manifest;
    println!(
        "dataset: {} images in {} classes (checksum {})",
        manifest.records.len(),
        manifest.classes.len(),
        &manifest.checksum[..12]
    );

    let opts = LoadOptions::from(&cfg);
    let set = load_dataset(&manifest, &opts)
        .with_context(|| format!("loading dataset {}", args.data.display()))?;
    println!(
        "preprocessed to {0}x{0} (roi: {1}, median filter: {2})",
        cfg.input_size, opts.roi, opts.median_filter
    );

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    write_file(&args.out, "config.json", &cfg.to_json_pretty())?;
    write_file(&args.out, "manifest.json", &manifest.to_json_pretty())?;

    // Probe the transfer checkpoint up front so a name/shape mismatch is
    // reported before any training time is spent.
    if let Some(ckpt) = &args.transfer {
        let mut probe = build_by_name::<f32>(
            &cfg.model,
            set.classes.len(),
            cfg.width_divisor,
            &cfg.inception_widths,
            cfg.input_size,
            cfg.seed,
        )?;
        let report = transfer_init(&mut probe, ckpt)
            .with_context(|| format!("probing transfer checkpoint {}", ckpt.display()))?;
        println!(
            "transfer from {}: {} parameters matched, {} kept at fresh \
             initialization, {} checkpoint entries unused",
            ckpt.display(),
            report.matched.len(),
            report.skipped_model.len(),
            report.skipped_file.len()
        );
        write_file(
            &args.out,
            "transfer_report.json",
            &serde_json::to_string_pretty(&report)?,
        )?;
    }

    let build = {
        let cfg = cfg.clone();
        let classes = set.classes.len();
        let transfer = args.transfer.clone();
        move |seed: u64| -> nemakit::Result<Model<f32>> {
            let mut model = build_by_name::<f32>(
                &cfg.model,
                classes,
                cfg.width_divisor,
                &cfg.inception_widths,
                cfg.input_size,
                seed,
            )?;
            if let Some(ckpt) = &transfer {
                transfer_init(&mut model, ckpt)?;
            }
            Ok(model)
        }
    };

    let cv = run_cross_validation(
        &build,
        &set.images,
        &set.labels,
        &set.classes,
        &cfg,
        args.parallel_folds,
    )?;
    write_file(&args.out, "fold_plan.json", &serde_json::to_string_pretty(&cv.plan)?)?;

    let mut failed: Vec<String> = Vec::new();
    let mut fold_rows: Vec<serde_json::Value> = Vec::new();
    println!();
    println!(
        "{:<6} {:>10} {:>10} {:>10} {:>12} {:>10} {:>10}",
        "fold", "accuracy", "precision", "recall", "specificity", "f1", "val_loss"
    );
    for report in &cv.reports {
        let dir = args.out.join(format!("fold_{}", report.fold));
        std::fs::create_dir_all(&dir)?;
        match &report.outcome {
            FoldOutcome::Completed { result, evaluation } => {
                write_fold(&dir, report.fold, result, evaluation, &set.classes)?;
                let m = &evaluation.metrics;
                println!(
                    "{:<6} {:>10.6} {:>10.6} {:>10.6} {:>12.6} {:>10.6} {:>10.6}",
                    report.fold,
                    m.accuracy,
                    m.precision,
                    m.recall,
                    m.specificity,
                    m.f1,
                    m.loss.unwrap_or(f64::NAN)
                );
                fold_rows.push(serde_json::json!({
                    "fold": report.fold,
                    "best_epoch": result.history.best_epoch,
                    "best_val_accuracy": result.history.best_val_accuracy,
                    "metrics": m,
                    "macro_auc": evaluation.roc.macro_auc,
                }));
            }
            FoldOutcome::Failed { error } => {
                std::fs::write(dir.join("error.txt"), error)?;
                println!("{:<6} FAILED: {error}", report.fold);
                failed.push(format!("fold {}: {error}", report.fold));
                fold_rows.push(serde_json::json!({
                    "fold": report.fold,
                    "error": error,
                }));
            }
        }
    }
    if let Some(agg) = &cv.aggregate {
        println!(
            "{:<6} {:>10.6} {:>10.6} {:>10.6} {:>12.6} {:>10.6}",
            "mean",
            agg.accuracy.mean,
            agg.precision.mean,
            agg.recall.mean,
            agg.specificity.mean,
            agg.f1.mean
        );
        println!(
            "{:<6} {:>10.6} {:>10.6} {:>10.6} {:>12.6} {:>10.6}",
            "sd", agg.accuracy.sd, agg.precision.sd, agg.recall.sd, agg.specificity.sd, agg.f1.sd
        );
    }

    let summary = serde_json::json!({
        "model": cfg.model,
        "config_version": nemakit::train::CONFIG_VERSION,
        "classes": set.classes,
        "images": set.images.len(),
        "manifest_checksum": manifest.checksum,
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "plan_k": cv.plan.k,
        "folds_run": cv.reports.len(),
        "folds": fold_rows,
        "aggregate": cv.aggregate,
        "wall_seconds": started.elapsed().as_secs_f64(),
    });
    write_file(&args.out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;

    println!();
    println!("bundle written to {}", args.out.display());
    println!("total wall time: {:.1}s", started.elapsed().as_secs_f64());

    if !failed.is_empty() {
        bail!(
            "{} of {} folds failed:\n  {}",
            failed.len(),
            cv.reports.len(),
            failed.join("\n  ")
        );
    }
    Ok(())
}

fn write_fold(
    dir: &Path,
    fold: usize,
    result: &FoldResult<f32>,
    evaluation: &Evaluation,
    class_names: &[String],
) -> anyhow::Result<()> {
    write_file(dir, "history.csv", &history_csv(&result.history.rows))?;
    write_file(dir, "lr_trace.csv", &lr_trace_csv(&result.history.lr_trace))?;
    write_file(dir, "curves.svg", &curves_svg(fold, &result.history.rows))?;
    write_file(dir, "evaluation.json", &serde_json::to_string_pretty(evaluation)?)?;
    write_file(dir, "metrics.csv", &metrics_csv(&evaluation.metrics))?;
    write_file(dir, "confusion.csv", &confusion_csv(&evaluation.confusion, class_names))?;
    write_file(
        dir,
        "confusion_normalized.csv",
        &confusion_normalized_csv(&evaluation.confusion, class_names),
    )?;
    write_file(
        dir,
        "confusion.svg",
        &confusion_heatmap_svg(&evaluation.confusion, class_names),
    )?;
    write_file(dir, "roc_points.csv", &roc_points_csv(&evaluation.roc, class_names))?;
    write_file(dir, "roc_auc.csv", &roc_auc_csv(&evaluation.roc, class_names))?;
    write_file(dir, "roc.svg", &roc_svg(&evaluation.roc, class_names))?;
    save_checkpoint(&result.model, dir.join("best.nema"))?;
    Ok(())
}
