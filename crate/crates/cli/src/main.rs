//! `nemakit`: command-line front end for the nematode classification toolkit.
//!
//! Subcommands:
//!
//! - `synth`     generate the deterministic synthetic fixture dataset
//! - `describe`  print a model's per-layer parameter census
//! - `train`     k-fold cross-validated training producing a report bundle
//! - `eval`      evaluate a checkpoint on a dataset split
//! - `gradcheck` finite-difference verification of the autodiff engine
//! - `plot`      regenerate training-curve SVGs from a report bundle
//!
//! `--dump-config` prints the embedded default training configuration so a
//! run can start from a known-good JSON file.

mod cmd_describe;
mod cmd_eval;
mod cmd_gradcheck;
mod cmd_plot;
mod cmd_synth;
mod cmd_train;
mod common;

use anyhow::bail;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "nemakit",
    version,
    about = "Nematode image classification: synthesis, training, evaluation, verification"
)]
struct Cli {
    /// Print the default training configuration as JSON and exit.
    #[arg(long)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic dataset of worm-like images.
    Synth(cmd_synth::SynthArgs),
    /// Print the per-layer parameter census of an architecture.
    Describe(cmd_describe::DescribeArgs),
    /// Train with stratified cross-validation and write a report bundle.
    Train(cmd_train::TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(cmd_eval::EvalArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(cmd_gradcheck::GradcheckArgs),
    /// Regenerate training-curve SVGs from a bundle's history CSVs.
    Plot(cmd_plot::PlotArgs),
}

fn main() {
    restore_sigpipe();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

/// Rust ignores SIGPIPE by default, turning `nemakit ... | head` into a
/// broken-pipe panic; restore the conventional terminate-quietly behavior.
#[cfg(unix)]
fn restore_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn restore_sigpipe() {}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.dump_config {
        println!("{}", nemakit::train::TrainConfig::default().to_json_pretty());
        return Ok(());
    }
    match cli.command {
        Some(Command::Synth(args)) => cmd_synth::run(args),
        Some(Command::Describe(args)) => cmd_describe::run(args),
        Some(Command::Train(args)) => cmd_train::run(args),
        Some(Command::Eval(args)) => cmd_eval::run(args),
        Some(Command::Gradcheck(args)) => cmd_gradcheck::run(args),
        Some(Command::Plot(args)) => cmd_plot::run(args),
        None => bail!("a subcommand is required (run with --help for the list)"),
    }
}
