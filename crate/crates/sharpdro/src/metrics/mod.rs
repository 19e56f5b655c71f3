//! Per-severity evaluation: accuracy, empirical sharpness, gradient norms,
//! OOD-score histograms, and loss-surface slices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{
    forward, loss_and_grad, loss_only, AutodiffError, ModelSpec, ParamLayout, ParameterVector,
};
use crate::datagen::CorruptedDataset;
use crate::methods::{sharpness_penalty, MethodsError, PerturbRule};
use crate::rng::{stream, Purpose};
use rand_distr::{Distribution, StandardNormal};

/// Errors from metric evaluation.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Methods(#[from] MethodsError),
    #[error("invalid metric request: {detail}")]
    Invalid { detail: String },
}

/// Evaluation results for one severity group at one epoch. `None` entries
/// mark severities absent from the evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub epoch: usize,
    pub severity: usize,
    pub accuracy: Option<f64>,
    pub loss: Option<f64>,
    pub sharpness: Option<f64>,
    pub grad_norm: Option<f64>,
}

/// Argmax accuracy of each severity group in the test split.
pub fn per_severity_accuracy(
    model: &ModelSpec,
    theta: &ParameterVector,
    test: &CorruptedDataset,
) -> Result<Vec<Option<f64>>, MetricsError> {
    let levels = test.max_severity() + 1;
    let mut out = vec![None; levels];
    for s in 0..levels {
        let idx = test.indices_at_severity(s);
        if idx.is_empty() {
            continue;
        }
        let x = test.features().gather_rows(&idx);
        let pred = forward(model, theta, &x)?;
        let hits: usize = pred
            .argmax()
            .iter()
            .zip(idx.iter().map(|&i| test.labels()[i]))
            .filter(|(&p, t)| p == *t)
            .count();
        out[s] = Some(hits as f64 / idx.len() as f64);
    }
    Ok(out)
}

/// Sharpness of each severity group, with the perturbation taken from that
/// group's own gradient.
pub fn empirical_sharpness(
    model: &ModelSpec,
    theta: &ParameterVector,
    test: &CorruptedDataset,
    rule: &PerturbRule,
) -> Result<Vec<Option<f64>>, MetricsError> {
    let levels = test.max_severity() + 1;
    let mut out = vec![None; levels];
    for s in 0..levels {
        let idx = test.indices_at_severity(s);
        if idx.is_empty() {
            continue;
        }
        let x = test.features().gather_rows(&idx);
        let y: Vec<usize> = idx.iter().map(|&i| test.labels()[i]).collect();
        out[s] = Some(sharpness_penalty(model, theta, &x, &y, None, rule)?);
    }
    Ok(out)
}

/// L2 norm of each severity group's mean loss gradient.
pub fn per_severity_grad_norm(
    model: &ModelSpec,
    theta: &ParameterVector,
    test: &CorruptedDataset,
) -> Result<Vec<Option<f64>>, MetricsError> {
    let levels = test.max_severity() + 1;
    let mut out = vec![None; levels];
    for s in 0..levels {
        let idx = test.indices_at_severity(s);
        if idx.is_empty() {
            continue;
        }
        let x = test.features().gather_rows(&idx);
        let y: Vec<usize> = idx.iter().map(|&i| test.labels()[i]).collect();
        let (_, g) = loss_and_grad(model, theta, &x, &y, None)?;
        out[s] = Some(g.l2_norm());
    }
    Ok(out)
}

/// Mean test loss of each severity group.
pub fn per_severity_loss(
    model: &ModelSpec,
    theta: &ParameterVector,
    test: &CorruptedDataset,
) -> Result<Vec<Option<f64>>, MetricsError> {
    let levels = test.max_severity() + 1;
    let mut out = vec![None; levels];
    for s in 0..levels {
        let idx = test.indices_at_severity(s);
        if idx.is_empty() {
            continue;
        }
        let x = test.features().gather_rows(&idx);
        let y: Vec<usize> = idx.iter().map(|&i| test.labels()[i]).collect();
        out[s] = Some(loss_only(model, theta, &x, &y, None)?);
    }
    Ok(out)
}

/// Full per-severity evaluation at one epoch.
pub fn evaluate_per_severity(
    model: &ModelSpec,
    theta: &ParameterVector,
    test: &CorruptedDataset,
    rule: &PerturbRule,
    epoch: usize,
) -> Result<Vec<MetricRow>, MetricsError> {
    let accuracy = per_severity_accuracy(model, theta, test)?;
    let loss = per_severity_loss(model, theta, test)?;
    let sharpness = empirical_sharpness(model, theta, test, rule)?;
    let grad_norm = per_severity_grad_norm(model, theta, test)?;
    Ok((0..=test.max_severity())
        .map(|s| MetricRow {
            epoch,
            severity: s,
            accuracy: accuracy[s],
            loss: loss[s],
            sharpness: sharpness[s],
            grad_norm: grad_norm[s],
        })
        .collect())
}

/// Per-severity histograms of normalized OOD scores over fixed bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodHistogram {
    /// Upper edge of the score range; bins cover `[0, max_score]`.
    pub max_score: f64,
    pub bins: usize,
    /// `counts[s][b]` = samples of severity `s` in bin `b`.
    pub counts: Vec<Vec<usize>>,
    /// Mean score per severity; `None` where no samples were seen.
    pub means: Vec<Option<f64>>,
}

/// Bins `(severity, score)` pairs into per-severity histograms on a common
/// `[0, max]` range.
pub fn ood_histogram(
    scores_by_severity: &[Vec<f64>],
    bins: usize,
) -> Result<OodHistogram, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::Invalid {
            detail: "need at least one bin".to_string(),
        });
    }
    let max_score = scores_by_severity
        .iter()
        .flatten()
        .cloned()
        .fold(0.0_f64, f64::max);
    let range = if max_score > 0.0 { max_score } else { 1.0 };
    let mut counts = vec![vec![0usize; bins]; scores_by_severity.len()];
    let mut means = vec![None; scores_by_severity.len()];
    for (s, scores) in scores_by_severity.iter().enumerate() {
        if scores.is_empty() {
            continue;
        }
        for &v in scores {
            let b = ((v / range) * bins as f64).floor() as usize;
            counts[s][b.min(bins - 1)] += 1;
        }
        means[s] = Some(scores.iter().sum::<f64>() / scores.len() as f64);
    }
    Ok(OodHistogram {
        max_score: range,
        bins,
        counts,
        means,
    })
}

/// A two-dimensional loss-surface slice through parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSlice {
    /// First orthonormal direction (flat parameter coordinates).
    pub direction_u: Vec<f64>,
    /// Second orthonormal direction.
    pub direction_v: Vec<f64>,
    pub grid_radius: f64,
    pub resolution: usize,
    /// Offsets along each direction, length `resolution`.
    pub offsets: Vec<f64>,
    /// `losses[s][i][j]` = severity-`s` loss at `theta + offsets[i] * u +
    /// offsets[j] * v`; `None` for severities absent from the split.
    pub losses: Vec<Option<Vec<Vec<f64>>>>,
}

/// Evaluates each severity group's loss on a 2-D affine grid spanned by two
/// seeded random orthonormal parameter directions. The resolution must be
/// odd so the center grid point is exactly `theta`.
pub fn loss_surface_slice(
    model: &ModelSpec,
    theta: &ParameterVector,
    test: &CorruptedDataset,
    grid_radius: f64,
    resolution: usize,
    seed: u64,
) -> Result<SurfaceSlice, MetricsError> {
    if resolution % 2 == 0 || resolution == 0 {
        return Err(MetricsError::Invalid {
            detail: format!("resolution must be odd, got {resolution}"),
        });
    }
    if grid_radius < 0.0 {
        return Err(MetricsError::Invalid {
            detail: "grid_radius must be nonnegative".to_string(),
        });
    }
    let n = theta.len();
    let draw = |index: u64| -> Vec<f64> {
        let mut rng = stream(seed, Purpose::SurfaceDirections, index);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    };
    let mut u = draw(0);
    let mut v = draw(1);
    // Gram-Schmidt
    let norm_u = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    for a in u.iter_mut() {
        *a /= norm_u;
    }
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    for (b, a) in v.iter_mut().zip(&u) {
        *b -= dot * a;
    }
    let norm_v = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    for b in v.iter_mut() {
        *b /= norm_v;
    }

    let half = (resolution / 2) as i64;
    let offsets: Vec<f64> = (-half..=half)
        .map(|k| grid_radius * k as f64 / half.max(1) as f64)
        .collect();

    let levels = test.max_severity() + 1;
    let layout: ParamLayout = theta.layout().clone();
    let mut losses = vec![None; levels];
    for s in 0..levels {
        let idx = test.indices_at_severity(s);
        if idx.is_empty() {
            continue;
        }
        let x = test.features().gather_rows(&idx);
        let y: Vec<usize> = idx.iter().map(|&i| test.labels()[i]).collect();
        // parallel over grid rows; ordered collect keeps determinism
        let grid: Vec<Vec<f64>> = offsets
            .par_iter()
            .map(|&a| {
                offsets
                    .iter()
                    .map(|&b| {
                        let point = if a == 0.0 && b == 0.0 {
                            theta.clone()
                        } else {
                            let values: Vec<f64> = theta
                                .values()
                                .iter()
                                .zip(u.iter().zip(&v))
                                .map(|(t, (du, dv))| t + a * du + b * dv)
                                .collect();
                            ParameterVector::new(layout.clone(), values)
                                .expect("layout matches by construction")
                        };
                        loss_only(model, &point, &x, &y, None).expect("grid loss evaluation")
                    })
                    .collect()
            })
            .collect();
        losses[s] = Some(grid);
    }
    Ok(SurfaceSlice {
        direction_u: u,
        direction_v: v,
        grid_radius,
        resolution,
        offsets,
        losses,
    })
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        var_x += (a - mean) * (a - mean);
        var_y += (b - mean) * (b - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x * var_y).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg_rank;
        }
        i = j + 1;
    }
    out
}
