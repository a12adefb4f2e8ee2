//! nemakit: a self-contained toolkit for nematode image classification.
//!
//! The crate provides, from the ground up:
//!
//! - [`engine`]: a dense-tensor library with reverse-mode autodiff covering
//!   exactly the layer set the architectures below need, plus a
//!   finite-difference gradient checker.
//! - [`model`]: graph builders for DenseNet121 and the hybrid NemaNet
//!   (DenseNet backbone + parallel Inception A/B/C branch), parameter
//!   accounting, and a bit-exact checkpoint format with partial loading for
//!   transfer learning.
//! - [`train`]: SGD with momentum under a triangular cyclic learning rate,
//!   per-epoch weight-decay interpolation, flip/rotate augmentation,
//!   stratified k-fold cross-validation, and best-checkpoint tracking.
//! - [`eval`]: confusion matrices, micro-aggregated precision / recall /
//!   specificity / F1, top-1 accuracy, and one-vs-rest ROC-AUC.
//! - [`data`]: dataset ingestion from a `root/<class>/<images>` layout, ROI
//!   extraction (Otsu threshold + largest connected component), bilinear
//!   resizing, and a deterministic synthetic fixture generator.
//! - [`report`]: CSV/JSON/SVG emitters for histories, metrics, and curves.
//!
//! Design goals: no opaque numerical dependencies (every kernel is written
//! here and cross-checked against naive references in the test suite),
//! bitwise determinism for a fixed seed, and 32-bit training with a 64-bit
//! instantiation reserved for gradient verification.

pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod model;
pub mod report;
pub mod train;
pub mod verify;

pub use engine::{
    argmax_rows, gradient_check, softmax_rows, GradCheckConfig, GradCheckReport, Scalar, Tape,
    Tensor, TensorId,
};
pub use error::{Error, Result};
