//! Subcommand implementations.

pub mod compare;
pub mod evaluate;
pub mod generate;
pub mod minimax_verify;
pub mod report;
pub mod sweep_rho;
pub mod train;

use std::path::Path;

use sharpdro::datagen::{generate_synthetic, load_csv, CorruptedDataset};

use crate::config::{DataKind, ExperimentConfig};
use crate::CliError;

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display()), None))
}

pub(crate) fn runtime(detail: String) -> CliError {
    CliError::Runtime(detail, None)
}

/// Datasets for a run: loaded from a `generate` directory when given, else
/// produced from the config (synthetic generator or CSV ingestion).
pub(crate) fn load_or_generate_data(
    cfg: &ExperimentConfig,
    data_dir: Option<&Path>,
) -> Result<(CorruptedDataset, CorruptedDataset), CliError> {
    if let Some(dir) = data_dir {
        let train = CorruptedDataset::load(&dir.join("train.ds"))
            .map_err(|e| runtime(format!("loading {}/train.ds: {e}", dir.display())))?;
        let test = CorruptedDataset::load(&dir.join("test.ds"))
            .map_err(|e| runtime(format!("loading {}/test.ds: {e}", dir.display())))?;
        return Ok((train, test));
    }
    let dist = cfg.severity_distribution()?;
    let kind = cfg.corruption_kind();
    match cfg.data.kind {
        DataKind::Synthetic => {
            generate_synthetic(&cfg.synthetic_spec(), &dist, &kind, cfg.data.seed)
                .map_err(|e| runtime(format!("generating data: {e}")))
        }
        DataKind::Csv => {
            let path = cfg.data.csv_path.as_ref().expect("validated");
            let label = cfg.data.label_column.as_ref().expect("validated");
            load_csv(Path::new(path), label, &dist, &kind, cfg.data.seed)
                .map_err(|e| runtime(format!("ingesting {path}: {e}")))
        }
    }
}
