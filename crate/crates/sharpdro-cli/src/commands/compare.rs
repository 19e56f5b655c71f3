//! `compare`: side-by-side method table over shared seeds.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sharpdro::methods::{train as train_loop, Method, RunRecord};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use crate::output::{method_name, record_rows, write_results_csv, write_text};
use crate::CliError;

use super::{ensure_dir, load_or_generate_data, runtime};

pub fn parse_method(name: &str) -> Result<Method, CliError> {
    match name {
        "ERM" => Ok(Method::Erm),
        "GroupDRO" => Ok(Method::GroupDro),
        "REx" => Ok(Method::Rex),
        "SAM" => Ok(Method::Sam),
        "SharpDROAware" => Ok(Method::SharpDroAware),
        "SharpDROAgnostic" => Ok(Method::SharpDroAgnostic),
        other => Err(CliError::Usage(format!(
            "unknown method {other:?}; expected one of ERM, GroupDRO, REx, SAM, \
             SharpDROAware, SharpDROAgnostic"
        ))),
    }
}

pub fn run(
    cfg: &ExperimentConfig,
    out: &Path,
    methods: &[String],
    seeds: &[u64],
    threads: usize,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    if methods.is_empty() || seeds.is_empty() {
        return Err(CliError::Usage(
            "compare needs at least one method and one seed".to_string(),
        ));
    }
    let methods: Vec<Method> = methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<_, _>>()?;

    let mut manifest = RunManifest::begin("compare", cfg.content_hash(), cfg.train.seed, threads);

    // every (method, seed) pair trains independently; data depends on the
    // seed so per-seed generation happens inside the task
    let jobs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results: Vec<Result<(Method, u64, RunRecord), CliError>> = jobs
        .par_iter()
        .map(|&(method, seed)| {
            let mut data_cfg = cfg.clone();
            data_cfg.data.seed = seed;
            let (train_data, test_data) = load_or_generate_data(&data_cfg, None)?;
            let model = cfg.model_spec(train_data.dim(), train_data.num_classes())?;
            let train_cfg = cfg.train_config(Some(method), Some(seed), None)?;
            let outcome = train_loop(&model, &train_cfg, &train_data, &test_data)
                .map_err(|e| runtime(format!("training {method:?} seed {seed}: {e}")))?;
            if let Some(diag) = &outcome.record.error {
                return Err(runtime(format!("{method:?} seed {seed} aborted: {diag}")));
            }
            Ok((method, seed, outcome.record))
        })
        .collect();

    let mut chunks = Vec::new();
    let mut records: Vec<(Method, u64, RunRecord)> = Vec::new();
    for r in results {
        let (method, seed, record) = r?;
        chunks.push(record_rows(method, seed, &record));
        records.push((method, seed, record));
    }
    write_results_csv(&out.join("compare.csv"), &chunks)?;

    // wide summary: one row per method, final-epoch accuracy per severity
    // averaged over seeds
    let levels = cfg.data.max_severity + 1;
    let mut table = String::from("method");
    for s in 0..levels {
        let _ = write!(table, ",severity_{s}");
    }
    table.push('\n');
    for &method in &methods {
        let _ = write!(table, "{}", method_name(method));
        for s in 0..levels {
            let mut total = 0.0;
            let mut count = 0usize;
            for (m, _, record) in &records {
                if *m != method {
                    continue;
                }
                let last = record.rows.last().expect("records have an init row");
                if let Some(acc) = last.metrics[s].accuracy {
                    total += acc;
                    count += 1;
                }
            }
            if count > 0 {
                let _ = write!(table, ",{}", total / count as f64);
            } else {
                let _ = write!(table, ",");
            }
        }
        table.push('\n');
    }
    write_text(&out.join("compare_table.csv"), &table)?;

    manifest.finish();
    manifest.save(out)?;
    println!(
        "compared {} methods x {} seeds into {}",
        methods.len(),
        seeds.len(),
        out.display()
    );
    Ok(())
}
