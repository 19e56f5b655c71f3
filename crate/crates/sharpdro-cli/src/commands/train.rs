//! `train`: one method, one seed, full record.

use std::path::Path;

use sharpdro::methods::train as train_loop;

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use crate::output::{record_rows, write_results_csv, write_text};
use crate::CliError;

use super::{ensure_dir, load_or_generate_data, runtime};

pub fn run(
    cfg: &ExperimentConfig,
    out: &Path,
    data_dir: Option<&Path>,
    threads: usize,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let mut manifest = RunManifest::begin("train", cfg.content_hash(), cfg.train.seed, threads);
    let (train_data, test_data) = load_or_generate_data(cfg, data_dir)?;
    manifest.dataset_hash = Some(train_data.content_hash());

    let model = cfg.model_spec(train_data.dim(), train_data.num_classes())?;
    let train_cfg = cfg.train_config(None, None, None)?;
    let outcome = train_loop(&model, &train_cfg, &train_data, &test_data)
        .map_err(|e| runtime(format!("training: {e}")))?;

    write_results_csv(
        &out.join("results.csv"),
        &[record_rows(train_cfg.method, train_cfg.seed, &outcome.record)],
    )?;
    let record_json = serde_json::to_string_pretty(&outcome.record)
        .map_err(|e| runtime(format!("record serialization: {e}")))?;
    write_text(&out.join("record.json"), &record_json)?;
    let params_json = serde_json::to_string(&outcome.params)
        .map_err(|e| runtime(format!("params serialization: {e}")))?;
    write_text(&out.join("params.json"), &params_json)?;
    write_text(&out.join("config.resolved.toml"), &cfg.to_canonical_toml())?;

    manifest.finish();
    manifest.save(out)?;

    if let Some(diag) = &outcome.record.error {
        return Err(CliError::Runtime(
            format!("run aborted: {diag}"),
            Some(out.join("manifest.json")),
        ));
    }
    println!(
        "trained {} for {} epochs into {}",
        crate::output::method_name(train_cfg.method),
        outcome.record.rows.len() - 1,
        out.display()
    );
    Ok(())
}
