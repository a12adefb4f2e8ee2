//! `nemakit eval`: evaluate a trained checkpoint on a dataset split.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use nemakit::data::{load_dataset, scan_dataset, LoadOptions};
use nemakit::eval::evaluate_split;
use nemakit::model::{build_by_name, load_checkpoint};
use nemakit::report::{
    confusion_csv, confusion_heatmap_svg, confusion_normalized_csv, metrics_csv, roc_auc_csv,
    roc_points_csv, roc_svg,
};
use nemakit::train::FoldPlan;

use crate::common::{resolve_config, write_file};

#[derive(Args)]
pub struct EvalArgs {
    /// Checkpoint (.nema) to load; every model parameter must be present.
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Dataset root: one subdirectory per class containing images.
    #[arg(long)]
    pub data: PathBuf,

    /// JSON config; must describe the architecture the checkpoint was
    /// trained with (embedded defaults when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Override the configured architecture.
    #[arg(long)]
    pub model: Option<String>,

    /// Override the configured input size.
    #[arg(long)]
    pub input_size: Option<usize>,

    /// Samples to evaluate: "all", or "fold:<i>" to use one held-out fold
    /// from a training bundle's plan (requires --plan).
    #[arg(long, default_value = "all")]
    pub split: String,

    /// fold_plan.json from a training bundle, for --split fold:<i>.
    #[arg(long)]
    pub plan: Option<PathBuf>,

    /// Output directory for the evaluation report.
    #[arg(long)]
    pub out: PathBuf,
}

enum Split {
    All,
    Fold(usize),
}

fn parse_split(text: &str) -> anyhow::Result<Split> {
    if text == "all" {
        return Ok(Split::All);
    }
    if let Some(rest) = text.strip_prefix("fold:") {
        let i = rest
            .parse::<usize>()
            .with_context(|| format!("invalid fold index {rest:?} in --split"))?;
        return Ok(Split::Fold(i));
    }
    bail!("--split must be \"all\" or \"fold:<i>\", got {text:?}")
}

pub fn run(args: EvalArgs) -> anyhow::Result<()> {
    let cfg = resolve_config(
        args.config.as_deref(),
        args.model.as_deref(),
        None,
        args.input_size,
    )?;
    let scanned = scan_dataset(&args.data)?;
    for warning in &scanned.warnings {
        eprintln!("warning: {warning}");
    }
    let manifest = scanned.manifest;
    let set = load_dataset(&manifest, &LoadOptions::from(&cfg))
        .with_context(|| format!("loading dataset {}", args.data.display()))?;

    let mut model = build_by_name::<f32>(
        &cfg.model,
        set.classes.len(),
        cfg.width_divisor,
        &cfg.inception_widths,
        cfg.input_size,
        cfg.seed,
    )?;
    load_checkpoint(&mut model, &args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;

    let indices: Vec<usize> = match parse_split(&args.split)? {
        Split::All => (0..set.images.len()).collect(),
        Split::Fold(i) => {
            let Some(plan_path) = &args.plan else {
                bail!("--split fold:{i} requires --plan <fold_plan.json>");
            };
            let text = std::fs::read_to_string(plan_path)
                .with_context(|| format!("reading {}", plan_path.display()))?;
            let plan: FoldPlan = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", plan_path.display()))?;
            if i >= plan.k {
                bail!("fold {i} out of range: the plan has {} folds", plan.k);
            }
            let indices = plan.val_indices(i).to_vec();
            if let Some(&max) = indices.iter().max() {
                if max >= set.images.len() {
                    bail!(
                        "fold plan index {max} exceeds the dataset size {}; \
                         the plan belongs to a different dataset",
                        set.images.len()
                    );
                }
            }
            indices
        }
    };

    println!(
        "evaluating {} on {} samples ({})",
        args.checkpoint.display(),
        indices.len(),
        args.split
    );
    let evaluation = evaluate_split(&model, &set.images, &set.labels, &indices, cfg.batch_size)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    write_file(&args.out, "evaluation.json", &serde_json::to_string_pretty(&evaluation)?)?;
    write_file(&args.out, "metrics.csv", &metrics_csv(&evaluation.metrics))?;
    write_file(&args.out, "confusion.csv", &confusion_csv(&evaluation.confusion, &set.classes))?;
    write_file(
        &args.out,
        "confusion_normalized.csv",
        &confusion_normalized_csv(&evaluation.confusion, &set.classes),
    )?;
    write_file(
        &args.out,
        "confusion.svg",
        &confusion_heatmap_svg(&evaluation.confusion, &set.classes),
    )?;
    write_file(&args.out, "roc_points.csv", &roc_points_csv(&evaluation.roc, &set.classes))?;
    write_file(&args.out, "roc_auc.csv", &roc_auc_csv(&evaluation.roc, &set.classes))?;
    write_file(&args.out, "roc.svg", &roc_svg(&evaluation.roc, &set.classes))?;

    let m = &evaluation.metrics;
    println!("loss:            {:.6}", m.loss.unwrap_or(f64::NAN));
    println!("accuracy:        {:.6}", m.accuracy);
    println!("precision:       {:.6}", m.precision);
    println!("recall:          {:.6}", m.recall);
    println!("specificity:     {:.6}", m.specificity);
    println!("f1:              {:.6}", m.f1);
    println!("binary accuracy: {:.6}", m.binary_accuracy_macro);
    println!("macro ROC-AUC:   {:.9}", evaluation.roc.macro_auc);
    println!("report written to {}", args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_parsing() {
        assert!(matches!(parse_split("all"), Ok(Split::All)));
        assert!(matches!(parse_split("fold:3"), Ok(Split::Fold(3))));
        assert!(parse_split("fold:x").is_err());
        assert!(parse_split("train").is_err());
    }
}
