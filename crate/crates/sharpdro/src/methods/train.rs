//! Epoch-driven training loop producing a per-epoch metric record.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::step::{step, Batch, TrainConfig, TrainState};
use super::MethodsError;
use crate::autodiff::{AutodiffError, ModelSpec, ParameterVector};
use crate::datagen::{spec_hash, CorruptedDataset};
use crate::metrics::{evaluate_per_severity, MetricRow};
use crate::rng::{stream, Purpose};

/// Identity of a training run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordManifest {
    /// Content hash of the training configuration and model architecture.
    pub config_hash: String,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

/// One logged epoch: training objective, per-severity test metrics, and the
/// current group weights (weighted methods) or mean normalized OOD score
/// per severity (distribution-agnostic method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    /// Mean per-batch objective over the epoch; `None` on the init row.
    pub train_loss: Option<f64>,
    pub metrics: Vec<MetricRow>,
    pub omega_or_score_mean: Vec<Option<f64>>,
}

/// Full record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub manifest: RecordManifest,
    /// Row 0 is the pre-training state; row `e` follows epoch `e`.
    pub rows: Vec<EpochRow>,
    /// Diagnostic set when the run aborted (e.g. non-finite loss).
    pub error: Option<String>,
}

/// Record plus final parameters.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub params: ParameterVector,
}

fn now_unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn is_non_finite(e: &crate::metrics::MetricsError) -> bool {
    use crate::metrics::MetricsError;
    matches!(
        e,
        MetricsError::Autodiff(AutodiffError::NonFinite { .. })
            | MetricsError::Methods(MethodsError::Autodiff(AutodiffError::NonFinite { .. }))
    )
}

fn weight_column(
    config: &TrainConfig,
    state: &TrainState,
    score_sums: Option<&[(f64, usize)]>,
    levels: usize,
) -> Vec<Option<f64>> {
    if config.method.uses_group_weights() {
        state.omega.values().iter().map(|&w| Some(w)).collect()
    } else if config.method.uses_ood_scores() {
        match score_sums {
            Some(acc) => acc
                .iter()
                .map(|&(sum, count)| {
                    if count > 0 {
                        Some(sum / count as f64)
                    } else {
                        None
                    }
                })
                .collect(),
            None => vec![None; levels],
        }
    } else {
        vec![None; levels]
    }
}

/// Trains for `config.epochs` passes over shuffled mini-batches, evaluating
/// the test split after every epoch. Deterministic given the config seed. A
/// non-finite loss aborts the run and leaves a diagnostic in the record.
pub fn train(
    model: &ModelSpec,
    config: &TrainConfig,
    train_data: &CorruptedDataset,
    test_data: &CorruptedDataset,
) -> Result<TrainOutcome, MethodsError> {
    config.validate()?;
    if model.input_dim != train_data.dim() || model.num_classes != train_data.num_classes() {
        return Err(MethodsError::InvalidConfig {
            detail: format!(
                "model ({} inputs, {} classes) does not match data ({} features, {} classes)",
                model.input_dim,
                model.num_classes,
                train_data.dim(),
                train_data.num_classes()
            ),
        });
    }
    if train_data.is_empty() {
        return Err(MethodsError::EmptyBatch);
    }

    let started = now_unix_ms();
    let levels = train_data.max_severity() + 1;
    let theta0 = model.init_params(config.seed);
    let mut state = TrainState::new(theta0, levels);
    let mut rows = Vec::with_capacity(config.epochs + 1);
    let mut error = None;

    rows.push(EpochRow {
        epoch: 0,
        train_loss: None,
        metrics: evaluate_per_severity(model, &state.theta, test_data, &config.perturb, 0)
            .map_err(|e| MethodsError::MetricEval {
                detail: e.to_string(),
            })?,
        omega_or_score_mean: weight_column(config, &state, None, levels),
    });

    let mut indices: Vec<usize> = (0..train_data.len()).collect();
    'epochs: for epoch in 1..=config.epochs {
        let mut rng = stream(config.seed, Purpose::EpochShuffle, epoch as u64);
        indices.shuffle(&mut rng);

        let mut objective_sum = 0.0;
        let mut batches = 0usize;
        let mut score_sums = vec![(0.0, 0usize); levels];
        for chunk in indices.chunks(config.batch_size) {
            let batch = Batch::gather(train_data, chunk);
            match step(model, &mut state, &batch, config) {
                Ok(info) => {
                    objective_sum += info.objective;
                    batches += 1;
                    if let Some(scores) = &info.sample_scores {
                        for (&s, &v) in batch.severity.iter().zip(scores) {
                            score_sums[s].0 += v;
                            score_sums[s].1 += 1;
                        }
                    }
                }
                Err(MethodsError::Autodiff(AutodiffError::NonFinite { context })) => {
                    error = Some(format!(
                        "aborted at epoch {epoch} after {batches} batches: non-finite {context}"
                    ));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }

        let metrics =
            match evaluate_per_severity(model, &state.theta, test_data, &config.perturb, epoch) {
                Ok(m) => m,
                Err(e) if is_non_finite(&e) => {
                    error = Some(format!(
                        "aborted at epoch {epoch}: {e} while evaluating metrics"
                    ));
                    break;
                }
                Err(e) => {
                    return Err(MethodsError::MetricEval {
                        detail: e.to_string(),
                    })
                }
            };
        rows.push(EpochRow {
            epoch,
            train_loss: Some(objective_sum / batches.max(1) as f64),
            metrics,
            omega_or_score_mean: weight_column(config, &state, Some(&score_sums), levels),
        });
    }

    Ok(TrainOutcome {
        record: RunRecord {
            manifest: RecordManifest {
                config_hash: spec_hash(&(config, model)),
                seed: config.seed,
                started_unix_ms: started,
                finished_unix_ms: now_unix_ms(),
            },
            rows,
            error,
        },
        params: state.theta,
    })
}
