//! Training: configuration, cyclic learning-rate schedule, SGD with
//! momentum, augmentation, stratified folds, and the fold/cross-validation
//! loops.

pub mod augment;
pub mod clr;
pub mod config;
pub mod folds;
pub mod sgd;
pub mod trainer;

pub use augment::{apply_augment, draw_augment, AugmentDraw};
pub use clr::{weight_decay_for_epoch, ClrSchedule};
pub use config::{TrainConfig, CONFIG_VERSION};
pub use folds::{make_folds, FoldPlan};
pub use sgd::{sgd_update, Sgd};
pub use trainer::{
    derive_seed, run_cross_validation, train_fold, transfer_init, CrossValidation, EpochRow,
    FoldOutcome, FoldReport, FoldResult, TrainHistory,
};
