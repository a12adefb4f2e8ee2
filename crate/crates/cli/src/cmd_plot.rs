//! `nemakit plot`: regenerate training-curve SVGs from a report bundle.
//!
//! Reads every `fold_<i>/history.csv` under the bundle directory and writes
//! `fold_<i>/curves.svg` next to it. Useful after hand-editing or merging
//! histories, and as a round-trip check that the CSVs parse back.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use nemakit::report::{curves_svg, parse_history_csv};

#[derive(Args)]
pub struct PlotArgs {
    /// Training bundle directory containing fold_<i>/history.csv files.
    #[arg(long)]
    pub bundle: PathBuf,
}

pub fn run(args: PlotArgs) -> anyhow::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(&args.bundle)
        .with_context(|| format!("reading {}", args.bundle.display()))?
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by_key(|e| e.file_name());

    let mut plotted = 0usize;
    for entry in entries {
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(fold) = name.strip_prefix("fold_").and_then(|s| s.parse::<usize>().ok()) else {
            continue;
        };
        let history_path = entry.path().join("history.csv");
        if !history_path.is_file() {
            continue;
        }
        let text = std::fs::read_to_string(&history_path)
            .with_context(|| format!("reading {}", history_path.display()))?;
        let rows = parse_history_csv(&text)
            .with_context(|| format!("parsing {}", history_path.display()))?;
        if rows.is_empty() {
            bail!("{} contains no epochs", history_path.display());
        }
        let out = entry.path().join("curves.svg");
        std::fs::write(&out, curves_svg(fold, &rows))
            .with_context(|| format!("writing {}", out.display()))?;
        println!("fold {fold}: curves.svg ({} epochs)", rows.len());
        plotted += 1;
    }
    if plotted == 0 {
        bail!(
            "no fold_<i>/history.csv files found under {}",
            args.bundle.display()
        );
    }
    Ok(())
}
