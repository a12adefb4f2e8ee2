//! Training configuration: JSON-backed, fully defaulted, validated.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::zoo::InceptionWidths;

/// Schema version of [`TrainConfig`]; bumped on incompatible layout changes.
pub const CONFIG_VERSION: u32 = 1;

/// Every knob of a training run. Unknown fields in a config file are
/// rejected so typos cannot silently fall back to defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Schema version; files written by other versions are rejected.
    pub config_version: u32,
    /// Architecture: `nemanet` or `densenet121`.
    pub model: String,
    /// Side length of the square network input; must be a multiple of 32.
    pub input_size: usize,
    /// Divides every channel width (1 = full size; larger values produce
    /// reduced models for desk-scale runs).
    pub width_divisor: usize,
    /// Channel widths of the Inception branch (nemanet only).
    pub inception_widths: InceptionWidths,
    pub batch_size: usize,
    pub momentum: f64,
    /// Weight decay interpolated linearly per epoch from start to end.
    pub weight_decay_start: f64,
    pub weight_decay_end: f64,
    /// Triangular cyclic learning rate: floor, peak, and the envelope's
    /// final value when decay is enabled.
    pub lr_base: f64,
    pub lr_peak: f64,
    pub lr_final: f64,
    pub clr_step_size: usize,
    pub clr_decay: bool,
    pub epochs: usize,
    /// Cross-validation folds; 1 means a single 80/20 holdout split.
    pub folds: usize,
    pub seed: u64,
    pub augment_mirror: bool,
    pub augment_flip: bool,
    pub augment_rotate: bool,
    /// Crop to the detected region of interest before resizing.
    pub roi: bool,
    /// Optional 3x3 median denoise before resizing (off by default).
    pub median_filter: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            config_version: CONFIG_VERSION,
            model: "nemanet".into(),
            input_size: 224,
            width_divisor: 1,
            inception_widths: InceptionWidths::default(),
            batch_size: 32,
            momentum: 0.9,
            weight_decay_start: 1e-5,
            weight_decay_end: 1e-6,
            lr_base: 6e-5,
            lr_peak: 1e-3,
            lr_final: 6e-6,
            clr_step_size: 100,
            clr_decay: true,
            epochs: 100,
            folds: 5,
            seed: 23,
            augment_mirror: true,
            augment_flip: true,
            augment_rotate: true,
            roi: true,
            median_filter: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.config_version != CONFIG_VERSION {
            return fail(format!(
                "config_version {} is not supported (this build reads version {CONFIG_VERSION})",
                self.config_version
            ));
        }
        if self.model != "nemanet" && self.model != "densenet121" {
            return fail(format!("unknown model `{}` (expected `nemanet` or `densenet121`)", self.model));
        }
        if self.input_size < 32 || self.input_size % 32 != 0 {
            return fail(format!("input_size must be a positive multiple of 32, got {}", self.input_size));
        }
        if self.width_divisor == 0 {
            return fail("width_divisor must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        for (name, v) in [
            ("lr_base", self.lr_base),
            ("lr_peak", self.lr_peak),
            ("lr_final", self.lr_final),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.lr_base >= self.lr_peak {
            return fail(format!(
                "lr_base must be below lr_peak (got base {}, peak {})",
                self.lr_base, self.lr_peak
            ));
        }
        for (name, v) in [
            ("weight_decay_start", self.weight_decay_start),
            ("weight_decay_end", self.weight_decay_end),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative and finite, got {v}"));
            }
        }
        if self.clr_step_size == 0 {
            return fail("clr_step_size must be at least 1".into());
        }
        if self.folds == 0 {
            return fail("folds must be at least 1".into());
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Config(format!("cannot read config `{}`: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_json_pretty();
        let back = TrainConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_files_fill_from_defaults() {
        let cfg = TrainConfig::from_json(r#"{ "epochs": 3, "width_divisor": 4 }"#).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.width_divisor, 4);
        assert_eq!(cfg.batch_size, 32);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = TrainConfig::from_json(r#"{ "epoches": 3 }"#).unwrap_err().to_string();
        assert!(err.contains("epoches"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            r#"{ "config_version": 7 }"#,
            r#"{ "model": "vgg" }"#,
            r#"{ "input_size": 100 }"#,
            r#"{ "batch_size": 0 }"#,
            r#"{ "momentum": 1.0 }"#,
            r#"{ "lr_base": 0.01 }"#,
            r#"{ "clr_step_size": 0 }"#,
            r#"{ "width_divisor": 0 }"#,
            r#"{ "folds": 0 }"#,
        ] {
            assert!(TrainConfig::from_json(text).is_err(), "{text}");
        }
    }
}
