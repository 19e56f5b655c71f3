//! `evaluate`: metric tables for saved parameters.

use std::fmt::Write as _;
use std::path::Path;

use sharpdro::autodiff::{forward, loss_and_grad, ParameterVector};
use sharpdro::methods::{epsilon_star, normalize_scores, ood_scores};
use sharpdro::metrics::{evaluate_per_severity, loss_surface_slice, ood_histogram};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use crate::output::{fmt_opt, method_name, write_results_csv, write_text};
use crate::CliError;

use super::{ensure_dir, load_or_generate_data, runtime};

const HISTOGRAM_BINS: usize = 20;
const SURFACE_RADIUS: f64 = 1.0;
const SURFACE_RESOLUTION: usize = 21;

pub fn run(
    cfg: &ExperimentConfig,
    params_path: &Path,
    out: &Path,
    data_dir: Option<&Path>,
    surface: bool,
    threads: usize,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let mut manifest = RunManifest::begin("evaluate", cfg.content_hash(), cfg.train.seed, threads);
    let (_, test_data) = load_or_generate_data(cfg, data_dir)?;
    manifest.dataset_hash = Some(test_data.content_hash());

    let params_text = std::fs::read_to_string(params_path)
        .map_err(|e| runtime(format!("reading {}: {e}", params_path.display())))?;
    let theta: ParameterVector = serde_json::from_str(&params_text)
        .map_err(|e| runtime(format!("parsing {}: {e}", params_path.display())))?;
    let model = cfg.model_spec(test_data.dim(), test_data.num_classes())?;
    if *theta.layout() != model.layout() {
        return Err(CliError::Usage(
            "saved parameters do not match the configured model architecture".to_string(),
        ));
    }
    let rule = cfg.perturb_rule()?;

    // per-severity metric table (normative columns; epoch 0 = this snapshot)
    let metrics = evaluate_per_severity(&model, &theta, &test_data, &rule, 0)
        .map_err(|e| runtime(format!("evaluation: {e}")))?;
    let mut body = String::new();
    for m in &metrics {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{},",
            method_name(cfg.train.method),
            cfg.train.seed,
            0,
            m.severity,
            fmt_opt(m.accuracy),
            fmt_opt(m.loss),
            fmt_opt(m.sharpness),
            fmt_opt(m.grad_norm),
        );
    }
    write_results_csv(&out.join("metrics.csv"), &[body])?;

    // OOD scores over the test split: epsilon from the pooled test gradient
    let all: Vec<usize> = (0..test_data.len()).collect();
    let x = test_data.features().gather_rows(&all);
    let y: Vec<usize> = all.iter().map(|&i| test_data.labels()[i]).collect();
    let p = forward(&model, &theta, &x).map_err(|e| runtime(format!("forward: {e}")))?;
    let (_, g) =
        loss_and_grad(&model, &theta, &x, &y, None).map_err(|e| runtime(format!("grad: {e}")))?;
    let eps = epsilon_star(&g, &rule);
    let perturbed = theta
        .perturbed(&eps)
        .map_err(|e| runtime(format!("perturbation: {e}")))?;
    let p_hat =
        forward(&model, &perturbed, &x).map_err(|e| runtime(format!("forward: {e}")))?;
    let raw = ood_scores(&p, &p_hat).map_err(|e| runtime(format!("scores: {e}")))?;
    let weights = normalize_scores(&raw);

    let levels = test_data.max_severity() + 1;
    let mut by_severity = vec![Vec::new(); levels];
    for (i, &s) in test_data.severities().iter().enumerate() {
        by_severity[s].push(weights.values()[i]);
    }
    let hist = ood_histogram(&by_severity, HISTOGRAM_BINS)
        .map_err(|e| runtime(format!("histogram: {e}")))?;
    let mut hist_csv = String::from("severity,bin_index,bin_low,bin_high,count,mean_score\n");
    for (s, counts) in hist.counts.iter().enumerate() {
        for (b, &count) in counts.iter().enumerate() {
            let lo = hist.max_score * b as f64 / hist.bins as f64;
            let hi = hist.max_score * (b + 1) as f64 / hist.bins as f64;
            let _ = writeln!(
                hist_csv,
                "{s},{b},{lo},{hi},{count},{}",
                fmt_opt(hist.means[s])
            );
        }
    }
    write_text(&out.join("ood_hist.csv"), &hist_csv)?;

    if surface {
        let slice = loss_surface_slice(
            &model,
            &theta,
            &test_data,
            SURFACE_RADIUS,
            SURFACE_RESOLUTION,
            cfg.train.seed,
        )
        .map_err(|e| runtime(format!("surface slice: {e}")))?;
        let mut surf = String::from("severity,i,j,offset_u,offset_v,loss\n");
        for (s, grid) in slice.losses.iter().enumerate() {
            if let Some(grid) = grid {
                for (i, row) in grid.iter().enumerate() {
                    for (j, &loss) in row.iter().enumerate() {
                        let _ = writeln!(
                            surf,
                            "{s},{i},{j},{},{},{loss}",
                            slice.offsets[i], slice.offsets[j]
                        );
                    }
                }
            }
        }
        write_text(&out.join("surface.csv"), &surf)?;
    }

    manifest.finish();
    manifest.save(out)?;
    println!("evaluated parameters into {}", out.display());
    Ok(())
}
