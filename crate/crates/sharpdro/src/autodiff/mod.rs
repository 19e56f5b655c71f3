//! Dense tensors, flat parameter vectors, and classifier models with exact
//! reverse-mode gradients.

mod model;
mod params;
mod tensor;

pub use model::{forward, loss_and_grad, loss_only, Activation, ModelSpec, Prediction};
pub use params::{apply_perturbation, LayoutEntry, ParamLayout, ParameterVector};
pub use tensor::Tensor;

use thiserror::Error;

/// Errors from tensor, parameter, and model operations.
#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("parameter layout mismatch: {detail}")]
    LayoutMismatch { detail: String },
    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },
    #[error("invalid model spec: {detail}")]
    InvalidSpec { detail: String },
    #[error("empty batch")]
    EmptyBatch,
}
