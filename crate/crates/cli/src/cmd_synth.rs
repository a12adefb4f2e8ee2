//! `nemakit synth`: generate the deterministic synthetic fixture dataset.

use std::path::PathBuf;

use clap::Args;
use nemakit::data::{generate_pretext_dataset, generate_synthetic_dataset, DatasetManifest};

use crate::common::write_file;

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory (created if missing); one subdirectory per class.
    #[arg(long)]
    pub out: PathBuf,

    /// Number of worm classes to generate (2..=5; ignored with --pretext).
    #[arg(long, default_value_t = 5)]
    pub classes: usize,

    /// Images per class.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,

    /// Square image side in pixels (at least 32).
    #[arg(long, default_value_t = 64)]
    pub size: usize,

    /// Base RNG seed; every image derives its own stream from it.
    #[arg(long, default_value_t = 23)]
    pub seed: u64,

    /// Generate the four-class geometric pretext dataset instead of worms,
    /// for pretraining a backbone on a task disjoint from the fixture.
    #[arg(long)]
    pub pretext: bool,
}

pub fn run(args: SynthArgs) -> anyhow::Result<()> {
    let previous = DatasetManifest::from_json_file(args.out.join("manifest.json"))
        .ok()
        .map(|m| m.checksum);

    let manifest = if args.pretext {
        generate_pretext_dataset(&args.out, args.per_class, args.size, args.seed)?
    } else {
        generate_synthetic_dataset(&args.out, args.classes, args.per_class, args.size, args.seed)?
    };
    write_file(&args.out, "manifest.json", &manifest.to_json_pretty())?;

    println!(
        "wrote {} images ({}x{}) under {}",
        manifest.records.len(),
        args.size,
        args.size,
        args.out.display()
    );
    for (class, count) in manifest.classes.iter().zip(manifest.class_counts()) {
        println!("  {class}: {count}");
    }
    println!("manifest checksum: {}", manifest.checksum);
    match previous {
        Some(prev) if prev == manifest.checksum => {
            println!("identical checksum (regeneration verified)");
        }
        Some(_) => println!("checksum differs from the directory's previous manifest"),
        None => {}
    }
    Ok(())
}
