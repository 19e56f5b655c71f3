//! `generate`: materialize dataset containers.

use std::path::Path;

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use crate::CliError;

use super::{ensure_dir, load_or_generate_data, runtime};

pub fn run(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<(), CliError> {
    ensure_dir(out)?;
    let mut manifest = RunManifest::begin("generate", cfg.content_hash(), cfg.data.seed, threads);
    let (train, test) = load_or_generate_data(cfg, None)?;

    train
        .save(&out.join("train.ds"))
        .map_err(|e| runtime(format!("writing train.ds: {e}")))?;
    test.save(&out.join("test.ds"))
        .map_err(|e| runtime(format!("writing test.ds: {e}")))?;

    manifest.dataset_hash = Some(train.content_hash());
    manifest.finish();
    manifest.save(out)?;
    println!(
        "generated {} train and {} test samples into {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}
