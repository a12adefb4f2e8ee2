//! Dataset ingestion, preprocessing, and synthetic fixtures.

pub mod loader;
pub mod manifest;
pub mod resize;
pub mod roi;
pub mod synthetic;

pub use loader::{load_dataset, preprocess_image, LoadOptions, LoadedDataset};
pub use manifest::{
    scan_dataset, DatasetManifest, SampleRecord, ScanOutcome, CANONICAL_SPECIES, MANIFEST_VERSION,
};
pub use resize::{median_filter_3x3, resize_normalize};
pub use roi::{
    detect_specimen, grayscale, largest_component, otsu_threshold, preprocess_roi, Component,
    MIN_COMPONENT_AREA_FRACTION,
};
pub use synthetic::{
    generate_pretext_dataset, generate_synthetic_dataset, pixel_statistics, render_pretext,
    render_worm, PRETEXT_CLASS_NAMES, SYNTHETIC_CLASS_NAMES,
};
