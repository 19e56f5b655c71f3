//! Worst-case sharpness minimization over Poisson-severity corruptions.
//!
//! The crate has five layers:
//!
//! * [`autodiff`] — dense tensors, flat parameter vectors, and classifier
//!   models (linear softmax / MLP) with exact reverse-mode gradients;
//! * [`datagen`] — corrupted datasets whose severity frequencies follow a
//!   Poisson law, from synthetic generators or ingested CSV tables;
//! * [`methods`] — training methods: ERM, GroupDRO, REx, SAM, and SharpDRO
//!   in distribution-aware and distribution-agnostic variants;
//! * [`minimax`] — an analytic nonconvex/PL minimax testbed that audits the
//!   stochastic two-step update's convergence guarantees against closed
//!   forms;
//! * [`metrics`] — per-severity evaluation: accuracy, empirical sharpness,
//!   gradient norms, OOD-score histograms, and loss-surface slices.
//!
//! All randomness flows through counter-based streams ([`rng`]), so every
//! result is reproducible from a seed and independent of thread scheduling.

pub mod autodiff;
pub mod datagen;
pub mod metrics;
pub mod methods;
pub mod minimax;
pub mod rng;

pub use autodiff::{ModelSpec, ParameterVector, Prediction, Tensor};
pub use datagen::{CorruptedDataset, CorruptionKind, SeverityDistribution, SyntheticSpec};
pub use methods::{PerturbRule, RunRecord, SampleWeights, SimplexWeights, TrainConfig};
pub use minimax::{QuadraticCoupledProblem, RateParams, Trajectory};
