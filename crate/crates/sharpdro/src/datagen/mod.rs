//! Corrupted-dataset construction: Poisson severity sampling, feature-space
//! corruption operators, synthetic generation, and table ingestion.

mod corruption;
mod dataset;
mod poisson;
mod synthetic;
mod table;

pub use corruption::{apply_corruption, CorruptionKind};
pub use dataset::{spec_hash, CorruptedDataset, Provenance};
pub use poisson::{poisson_pmf, sample_severities, severity_probs, SeverityDistribution, TailMode};
pub use synthetic::{class_means, generate_synthetic, SyntheticSpec};
pub use table::load_csv;

use thiserror::Error;

/// Errors from dataset construction and ingestion.
#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("poisson rate must be positive and finite, got {lambda}")]
    InvalidRate { lambda: f64 },
    #[error("invalid corruption: {detail}")]
    InvalidCorruption { detail: String },
    #[error("inconsistent dataset: {detail}")]
    Inconsistent { detail: String },
    #[error("cannot parse cell {cell:?} at row {row}, column {column}")]
    BadCell {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("label column {column:?} not found in header")]
    MissingColumn { column: String },
    #[error("label column holds a single class; need at least two")]
    SingleClass,
    #[error("bad dataset container: {detail}")]
    BadContainer { detail: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
