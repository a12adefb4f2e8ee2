//! `nemakit describe`: print the per-layer parameter census of a model.

use std::path::PathBuf;

use clap::Args;
use nemakit::model::build_by_name;
use nemakit::report::census_csv;
use nemakit::train::TrainConfig;

use crate::common::commas;

/// Reference totals for the full-width hybrid model with five classes:
/// (total, trainable, non-trainable).
const REFERENCE_NEMANET_5: (usize, usize, usize) = (17_918_565, 17_817_925, 100_640);

#[derive(Args)]
pub struct DescribeArgs {
    /// Architecture: "nemanet" or "densenet121".
    #[arg(long, default_value = "nemanet")]
    pub model: String,

    /// Number of output classes.
    #[arg(long, default_value_t = 5)]
    pub classes: usize,

    /// Square input side in pixels (multiple of 32, at least 32).
    #[arg(long, default_value_t = 224)]
    pub input_size: usize,

    /// Divide every channel width by this factor (1 = full width).
    #[arg(long, default_value_t = 1)]
    pub width_divisor: usize,

    /// Also write the census as CSV to this path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn run(args: DescribeArgs) -> anyhow::Result<()> {
    let widths = TrainConfig::default().inception_widths;
    let model = build_by_name::<f32>(
        &args.model,
        args.classes,
        args.width_divisor,
        &widths,
        args.input_size,
        0,
    )?;
    let census = model.census();

    println!("architecture: {}", model.arch());
    println!("classes: {}", args.classes);
    println!("input size: {}", args.input_size);
    println!("width divisor: {}", args.width_divisor);
    println!();
    println!(
        "{:<52} {:<16} {:>12} {:>14}",
        "layer", "kind", "trainable", "non-trainable"
    );
    for row in &census.layers {
        println!(
            "{:<52} {:<16} {:>12} {:>14}",
            row.name, row.kind, row.trainable, row.non_trainable
        );
    }
    println!();
    println!("trainable parameters: {}", census.trainable);
    println!("non-trainable parameters: {}", census.non_trainable);
    println!("total parameters: {} ({})", census.total, commas(census.total));

    if args.model == "nemanet" && args.width_divisor == 1 && args.classes == 5 {
        let (total, trainable, non_trainable) = REFERENCE_NEMANET_5;
        println!();
        println!(
            "reference totals: {} total, {} trainable, {} non-trainable",
            total, trainable, non_trainable
        );
        println!(
            "deviation from reference: total {:+}, trainable {:+}, non-trainable {:+}",
            census.total as i64 - total as i64,
            census.trainable as i64 - trainable as i64,
            census.non_trainable as i64 - non_trainable as i64,
        );
        println!(
            "(informational: the reference design leaves several branch widths \
             open; the defaults here were solved to reproduce these totals)"
        );
    }

    if let Some(path) = &args.csv {
        std::fs::write(path, census_csv(&census))?;
        println!("census CSV written to {}", path.display());
    }
    Ok(())
}
