//! Minimal dense-tensor engine with reverse-mode automatic differentiation.
//!
//! The op set is exactly what the model zoo needs: conv2d, batch norm, relu,
//! max/average/global pooling, channel concat, linear, and softmax
//! cross-entropy. Everything runs on a [`tape::Tape`] that records forward
//! results and replays them backward.

pub mod gradcheck;
pub mod linalg;
pub mod ops;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use ops::act::{argmax_rows, softmax_rows};
pub use ops::norm::{BN_EPSILON, BN_MOMENTUM};
pub use scalar::Scalar;
pub use tape::{Tape, TensorId};
pub use tensor::Tensor;
