//! `sweep-rho`: accuracy-vs-perturbation-scale table.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sharpdro::methods::{train as train_loop, Method};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use crate::output::write_text;
use crate::CliError;

use super::{ensure_dir, load_or_generate_data, runtime};

pub fn run(
    cfg: &ExperimentConfig,
    out: &Path,
    rhos: &[f64],
    seeds: &[u64],
    threads: usize,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    if rhos.is_empty() || seeds.is_empty() {
        return Err(CliError::Usage(
            "sweep-rho needs at least one rho and one seed".to_string(),
        ));
    }
    if let Some(&bad) = rhos.iter().find(|&&r| r < 0.0 || !r.is_finite()) {
        return Err(CliError::Usage(format!(
            "sweep-rho: rho values must be finite and nonnegative, got {bad}"
        )));
    }
    let mut manifest = RunManifest::begin("sweep-rho", cfg.content_hash(), cfg.train.seed, threads);

    // sweep the sharpness-aware method unless the config picked another
    // perturbation-using method
    let method = if matches!(
        cfg.train.method,
        Method::Sam | Method::SharpDroAware | Method::SharpDroAgnostic
    ) {
        cfg.train.method
    } else {
        Method::SharpDroAware
    };

    let jobs: Vec<(f64, u64)> = rhos
        .iter()
        .flat_map(|&r| seeds.iter().map(move |&s| (r, s)))
        .collect();
    let results: Vec<Result<(f64, u64, Vec<Option<f64>>), CliError>> = jobs
        .par_iter()
        .map(|&(rho, seed)| {
            let mut data_cfg = cfg.clone();
            data_cfg.data.seed = seed;
            let (train_data, test_data) = load_or_generate_data(&data_cfg, None)?;
            let model = cfg.model_spec(train_data.dim(), train_data.num_classes())?;
            let train_cfg = cfg.train_config(Some(method), Some(seed), Some(rho))?;
            let outcome = train_loop(&model, &train_cfg, &train_data, &test_data)
                .map_err(|e| runtime(format!("training rho {rho} seed {seed}: {e}")))?;
            if let Some(diag) = &outcome.record.error {
                return Err(runtime(format!("rho {rho} seed {seed} aborted: {diag}")));
            }
            let last = outcome.record.rows.last().expect("init row exists");
            Ok((
                rho,
                seed,
                last.metrics.iter().map(|m| m.accuracy).collect(),
            ))
        })
        .collect();

    let levels = cfg.data.max_severity + 1;
    let mut long = String::from("rho,seed,severity,accuracy\n");
    let mut rows = Vec::new();
    for r in results {
        let (rho, seed, accs) = r?;
        for (s, acc) in accs.iter().enumerate() {
            if let Some(a) = acc {
                let _ = writeln!(long, "{rho},{seed},{s},{a}");
            }
        }
        rows.push((rho, accs));
    }
    write_text(&out.join("sweep.csv"), &long)?;

    // wide table: one row per rho, per-severity accuracy averaged over seeds
    let mut table = String::from("rho");
    for s in 0..levels {
        let _ = write!(table, ",severity_{s}");
    }
    table.push('\n');
    for &rho in rhos {
        let _ = write!(table, "{rho}");
        for s in 0..levels {
            let mut total = 0.0;
            let mut count = 0usize;
            for (r, accs) in &rows {
                if *r == rho {
                    if let Some(a) = accs[s] {
                        total += a;
                        count += 1;
                    }
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
    write_text(&out.join("sweep_table.csv"), &table)?;

    manifest.finish();
    manifest.save(out)?;
    println!(
        "swept {} rho values x {} seeds into {}",
        rhos.len(),
        seeds.len(),
        out.display()
    );
    Ok(())
}
