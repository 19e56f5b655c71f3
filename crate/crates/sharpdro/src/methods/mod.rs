//! Training methods: ERM, GroupDRO, REx, SAM, and SharpDRO in
//! distribution-aware and distribution-agnostic variants.

mod ood;
mod perturb;
mod step;
mod train;
mod weights;

pub use ood::{normalize_scores, ood_scores};
pub use perturb::{
    epsilon_star, sharpness_penalty, sharpness_penalty_of, PerturbKind, PerturbRule,
};
pub use step::{group_losses, step, Batch, Method, StepInfo, TrainConfig, TrainState};
pub use train::{train, EpochRow, RecordManifest, RunRecord, TrainOutcome};
pub use weights::{
    project_to_simplex, weight_update, SampleWeights, SimplexWeights, WeightUpdateMode,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;

/// Errors from method configuration and stepping.
#[derive(Debug, Error)]
pub enum MethodsError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },
    #[error("invalid weights: {detail}")]
    InvalidWeights { detail: String },
    #[error("metric evaluation failed: {detail}")]
    MetricEval { detail: String },
    #[error("empty batch")]
    EmptyBatch,
}
