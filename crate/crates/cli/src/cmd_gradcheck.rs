//! `nemakit gradcheck`: finite-difference verification of the autodiff engine.

use anyhow::bail;
use clap::{Args, ValueEnum};
use nemakit::verify::{check_blocks, check_model, check_ops, corrupted_control, CheckRow};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    /// Individual operators (conv, pooling, batch norm, losses, ...).
    Ops,
    /// Composite blocks (dense layers, transitions, inception branches, ...).
    Blocks,
    /// Selected parameters of a reduced end-to-end model.
    Model,
    /// Everything above.
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// Which scope to verify.
    #[arg(long, value_enum, default_value_t = Scope::All)]
    pub scope: Scope,

    /// Scalar precision to run at (tolerances adapt to the precision).
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,

    /// Base RNG seed for the probe tensors.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Also run the deliberately corrupted control, which must FAIL:
    /// proof that the checker can catch a wrong gradient.
    #[arg(long)]
    pub corrupt: bool,
}

fn collect<S: nemakit::Scalar>(scope: Scope, seed: u64) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    if matches!(scope, Scope::Ops | Scope::All) {
        rows.extend(check_ops::<S>(seed));
    }
    if matches!(scope, Scope::Blocks | Scope::All) {
        rows.extend(check_blocks::<S>(seed));
    }
    if matches!(scope, Scope::Model | Scope::All) {
        rows.extend(check_model::<S>(seed));
    }
    rows
}

fn print_rows(rows: &[CheckRow]) -> usize {
    let mut failures = 0usize;
    for row in rows {
        let status = if row.passed { "ok  " } else { "FAIL" };
        print!(
            "{status}  {:<48} max rel err {:>10.3e}  (tol {:.0e})",
            row.name, row.max_rel_err, row.rel_tol
        );
        if row.detail.is_empty() {
            println!();
        } else {
            println!("  {}", row.detail);
        }
        if !row.passed {
            failures += 1;
        }
    }
    failures
}

pub fn run(args: GradcheckArgs) -> anyhow::Result<()> {
    let rows = match args.precision {
        Precision::F32 => collect::<f32>(args.scope, args.seed),
        Precision::F64 => collect::<f64>(args.scope, args.seed),
    };
    let failures = print_rows(&rows);
    println!("{} checks, {} failed", rows.len(), failures);

    if args.corrupt {
        let control = match args.precision {
            Precision::F32 => corrupted_control::<f32>(args.seed),
            Precision::F64 => corrupted_control::<f64>(args.seed),
        };
        for row in &control {
            if row.passed {
                bail!(
                    "corrupted control `{}` PASSED: the checker failed to detect a wrong gradient",
                    row.name
                );
            }
            println!(
                "corrupted control `{}` correctly rejected (max rel err {:.3e})",
                row.name, row.max_rel_err
            );
        }
    }

    if failures > 0 {
        bail!("{failures} gradient checks failed");
    }
    Ok(())
}
