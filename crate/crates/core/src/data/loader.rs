//! Loading a scanned dataset into in-memory input tensors.

use image::RgbImage;

use crate::data::manifest::DatasetManifest;
use crate::data::resize::{median_filter_3x3, resize_normalize};
use crate::data::roi::preprocess_roi;
use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::train::TrainConfig;

/// Preprocessing switches for ingestion.
#[derive(Clone, Debug)]
pub struct LoadOptions {
    /// Square side of the network input.
    pub input_size: usize,
    /// Crop to the detected specimen before resizing.
    pub roi: bool,
    /// Apply a 3×3 median filter before anything else.
    pub median_filter: bool,
}

impl From<&TrainConfig> for LoadOptions {
    fn from(cfg: &TrainConfig) -> Self {
        LoadOptions { input_size: cfg.input_size, roi: cfg.roi, median_filter: cfg.median_filter }
    }
}

/// A dataset materialized as CHW tensors in manifest order.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub images: Vec<Tensor<f32>>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
}

/// Run one color image through the configured pipeline:
/// median filter (optional) → ROI crop (optional) → bilinear resize to
/// `input_size` normalized to `[0, 1]` RGB channels-first.
pub fn preprocess_image(img: &RgbImage, opts: &LoadOptions) -> Result<Tensor<f32>> {
    let filtered;
    let mut current: &RgbImage = if opts.median_filter {
        filtered = median_filter_3x3(img);
        &filtered
    } else {
        img
    };
    let cropped;
    if opts.roi {
        cropped = preprocess_roi(current)?;
        current = &cropped;
    }
    resize_normalize(current, opts.input_size)
}

/// Load every manifest record into memory.
pub fn load_dataset(manifest: &DatasetManifest, opts: &LoadOptions) -> Result<LoadedDataset> {
    let mut images = Vec::with_capacity(manifest.records.len());
    for record in &manifest.records {
        let path = manifest.absolute_path(record);
        let img = image::open(&path)
            .map_err(|e| Error::Data(format!("cannot open `{}`: {e}", path.display())))?
            .to_rgb8();
        let tensor = preprocess_image(&img, opts)
            .map_err(|e| Error::Data(format!("`{}`: {e}", path.display())))?;
        images.push(tensor);
    }
    Ok(LoadedDataset { images, labels: manifest.labels(), classes: manifest.classes.clone() })
}
