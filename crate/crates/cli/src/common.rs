//! Helpers shared by the command implementations.

use std::path::Path;

use anyhow::Context;
use nemakit::train::TrainConfig;

/// Environment variable that, when set, overrides the configured RNG seed.
/// Lets scripted reruns vary the seed without editing the config file.
pub const SEED_ENV: &str = "NEMAKIT_SEED";

/// Resolve the effective configuration: embedded defaults, then the config
/// file (if given), then command-line overrides, then the [`SEED_ENV`]
/// environment override, validated at the end.
pub fn resolve_config(
    path: Option<&Path>,
    model: Option<&str>,
    folds: Option<usize>,
    input_size: Option<usize>,
) -> anyhow::Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::from_json_file(p)
            .with_context(|| format!("reading config {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(m) = model {
        cfg.model = m.to_string();
    }
    if let Some(f) = folds {
        cfg.folds = f;
    }
    if let Some(s) = input_size {
        cfg.input_size = s;
    }
    if let Ok(raw) = std::env::var(SEED_ENV) {
        cfg.seed = raw
            .trim()
            .parse::<u64>()
            .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got {raw:?}"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Format a count with thousands separators: 8062504 -> "8,062,504".
pub fn commas(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Write `contents` to `dir/name` with a path-bearing error.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}
