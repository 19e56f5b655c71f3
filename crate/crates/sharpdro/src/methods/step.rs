//! Single-batch updates for every training method.
//!
//! All sharpness-aware variants share one code path: compute a source
//! gradient, perturb the parameters with [`epsilon_star`], take the final
//! gradient at the perturbed point, and descend. The plain variants skip the
//! perturbation. Weighted variants expand their distribution or OOD weights
//! into unit-mean per-sample weights first, so the degenerate cases (zero
//! perturbation scale, a single severity group, uniform OOD scores) are
//! bitwise identical to the corresponding plain method.

use serde::{Deserialize, Serialize};

use super::ood::{normalize_scores, ood_scores};
use super::perturb::{epsilon_star, PerturbRule};
use super::weights::{weight_update, SampleWeights, SimplexWeights, WeightUpdateMode};
use super::MethodsError;
use crate::autodiff::{forward, loss_and_grad, loss_only, ModelSpec, ParameterVector, Tensor};
use crate::datagen::CorruptedDataset;

/// Training method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ERM")]
    Erm,
    #[serde(rename = "GroupDRO")]
    GroupDro,
    #[serde(rename = "REx")]
    Rex,
    #[serde(rename = "SAM")]
    Sam,
    #[serde(rename = "SharpDROAware")]
    SharpDroAware,
    #[serde(rename = "SharpDROAgnostic")]
    SharpDroAgnostic,
}

impl Method {
    /// Methods that ascend simplex weights over severity groups.
    pub fn uses_group_weights(self) -> bool {
        matches!(self, Method::GroupDro | Method::SharpDroAware)
    }

    /// Methods that score samples by confidence drop.
    pub fn uses_ood_scores(self) -> bool {
        matches!(self, Method::SharpDroAgnostic)
    }
}

/// Full training configuration for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub eta_theta: f64,
    pub eta_omega: f64,
    pub perturb: PerturbRule,
    pub rex_beta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_update: WeightUpdateMode,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Reuse the scoring perturbation for the final distribution-agnostic
    /// step instead of recomputing it from the weighted gradient.
    pub reuse_score_epsilon: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MethodsError> {
        if !(self.eta_theta > 0.0) {
            return Err(MethodsError::InvalidConfig {
                detail: format!("eta_theta must be positive, got {}", self.eta_theta),
            });
        }
        if !(self.eta_omega > 0.0) {
            return Err(MethodsError::InvalidConfig {
                detail: format!("eta_omega must be positive, got {}", self.eta_omega),
            });
        }
        if self.batch_size < 1 {
            return Err(MethodsError::InvalidConfig {
                detail: "batch_size must be at least 1".to_string(),
            });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(MethodsError::InvalidConfig {
                detail: format!("momentum must lie in [0, 1), got {}", self.momentum),
            });
        }
        if self.weight_decay < 0.0 || self.rex_beta < 0.0 {
            return Err(MethodsError::InvalidConfig {
                detail: "weight_decay and rex_beta must be nonnegative".to_string(),
            });
        }
        Ok(())
    }
}

/// A materialized mini-batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Tensor,
    pub y: Vec<usize>,
    pub severity: Vec<usize>,
}

impl Batch {
    pub fn gather(data: &CorruptedDataset, idx: &[usize]) -> Self {
        Self {
            x: data.features().gather_rows(idx),
            y: idx.iter().map(|&i| data.labels()[i]).collect(),
            severity: idx.iter().map(|&i| data.severities()[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Indices of batch members at each severity level; `None` for levels
    /// absent from this batch.
    fn split_by_severity(&self, levels: usize) -> Vec<Option<Vec<usize>>> {
        let mut groups: Vec<Option<Vec<usize>>> = vec![None; levels];
        for (i, &s) in self.severity.iter().enumerate() {
            groups[s].get_or_insert_with(Vec::new).push(i);
        }
        groups
    }
}

/// Mean cross-entropy of each severity group present in the batch.
pub fn group_losses(
    model: &ModelSpec,
    theta: &ParameterVector,
    batch: &Batch,
    levels: usize,
) -> Result<Vec<Option<f64>>, MethodsError> {
    let groups = batch.split_by_severity(levels);
    let mut losses = vec![None; levels];
    for (s, group) in groups.iter().enumerate() {
        if let Some(idx) = group {
            let x = batch.x.gather_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| batch.y[i]).collect();
            losses[s] = Some(loss_only(model, theta, &x, &y, None)?);
        }
    }
    Ok(losses)
}

/// Mutable training state: parameters, group weights, momentum buffer.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub theta: ParameterVector,
    pub omega: SimplexWeights,
    momentum_buf: Option<ParameterVector>,
}

impl TrainState {
    pub fn new(theta: ParameterVector, levels: usize) -> Self {
        Self {
            theta,
            omega: SimplexWeights::uniform(levels),
            momentum_buf: None,
        }
    }
}

/// What a single step produced, for logging.
#[derive(Debug, Clone)]
pub struct StepInfo {
    /// The method's own objective estimate on this batch.
    pub objective: f64,
    /// Applied descent direction (the gradient fed to the update).
    pub update_direction: ParameterVector,
    /// Normalized OOD scores per batch member (distribution-agnostic only).
    pub sample_scores: Option<Vec<f64>>,
}

/// Descends `theta` along `grad`, wrapping only this final step in optional
/// weight decay and momentum; perturbation gradients are never wrapped.
fn apply_update(state: &mut TrainState, grad: ParameterVector, config: &TrainConfig) {
    let mut g = grad;
    if config.weight_decay > 0.0 {
        let theta_snapshot = state.theta.clone();
        g.axpy(config.weight_decay, &theta_snapshot)
            .expect("gradient layout matches parameters");
    }
    if config.momentum > 0.0 {
        match &mut state.momentum_buf {
            Some(buf) => {
                for (b, gv) in buf.values_mut().iter_mut().zip(g.values()) {
                    *b = config.momentum * *b + gv;
                }
                g = buf.clone();
            }
            None => {
                state.momentum_buf = Some(g.clone());
            }
        }
    }
    state
        .theta
        .axpy(-config.eta_theta, &g)
        .expect("gradient layout matches parameters");
}

fn weighted_loss_and_grad(
    model: &ModelSpec,
    theta: &ParameterVector,
    batch: &Batch,
    weights: Option<&SampleWeights>,
) -> Result<(f64, ParameterVector), MethodsError> {
    let w = weights.map(|sw| sw.values());
    Ok(loss_and_grad(model, theta, &batch.x, &batch.y, w)?)
}

/// Gradient step at `theta + epsilon_star(source gradient)`, or at `theta`
/// itself when no rule is given.
fn perturbed_step(
    model: &ModelSpec,
    state: &mut TrainState,
    batch: &Batch,
    weights: Option<&SampleWeights>,
    rule: Option<&PerturbRule>,
    config: &TrainConfig,
) -> Result<StepInfo, MethodsError> {
    let (objective, grad) = match rule {
        None => weighted_loss_and_grad(model, &state.theta, batch, weights)?,
        Some(rule) => {
            let (_, g0) = weighted_loss_and_grad(model, &state.theta, batch, weights)?;
            let eps = epsilon_star(&g0, rule);
            let perturbed = state.theta.perturbed(&eps)?;
            weighted_loss_and_grad(model, &perturbed, batch, weights)?
        }
    };
    let info = StepInfo {
        objective,
        update_direction: grad.clone(),
        sample_scores: None,
    };
    apply_update(state, grad, config);
    Ok(info)
}

fn rex_step(
    model: &ModelSpec,
    state: &mut TrainState,
    batch: &Batch,
    levels: usize,
    config: &TrainConfig,
) -> Result<StepInfo, MethodsError> {
    let groups = batch.split_by_severity(levels);
    let mut losses = Vec::new();
    let mut grads = Vec::new();
    for group in groups.iter().flatten() {
        let x = batch.x.gather_rows(group);
        let y: Vec<usize> = group.iter().map(|&i| batch.y[i]).collect();
        let (l, g) = loss_and_grad(model, &state.theta, &x, &y, None)?;
        losses.push(l);
        grads.push(g);
    }
    let m = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / m;
    let variance = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / m;
    let objective = losses.iter().sum::<f64>() + config.rex_beta * variance;

    // d/dtheta [sum_s l_s + beta * Var(l)] = sum_s (1 + 2 beta (l_s - mean) / m) g_s
    let mut grad = ParameterVector::zeros(state.theta.layout().clone());
    for (l, g) in losses.iter().zip(&grads) {
        let coeff = 1.0 + config.rex_beta * 2.0 * (l - mean) / m;
        grad.axpy(coeff, g)?;
    }
    let info = StepInfo {
        objective,
        update_direction: grad.clone(),
        sample_scores: None,
    };
    apply_update(state, grad, config);
    Ok(info)
}

fn agnostic_step(
    model: &ModelSpec,
    state: &mut TrainState,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<StepInfo, MethodsError> {
    // first pass: predictions and gradient at theta
    let p = forward(model, &state.theta, &batch.x)?;
    let (_, g0) = weighted_loss_and_grad(model, &state.theta, batch, None)?;
    let eps0 = epsilon_star(&g0, &config.perturb);

    // second pass: predictions under the perturbation, then scores
    let perturbed = state.theta.perturbed(&eps0)?;
    let p_hat = forward(model, &perturbed, &batch.x)?;
    let raw = ood_scores(&p, &p_hat)?;
    let weights = normalize_scores(&raw);

    // final step: epsilon from the weighted gradient (or reused), descent
    // at the perturbed point under the score weights
    let eps_final = if config.reuse_score_epsilon {
        eps0
    } else {
        let (_, gw) = weighted_loss_and_grad(model, &state.theta, batch, Some(&weights))?;
        epsilon_star(&gw, &config.perturb)
    };
    let at = state.theta.perturbed(&eps_final)?;
    let (objective, grad) = weighted_loss_and_grad(model, &at, batch, Some(&weights))?;
    let info = StepInfo {
        objective,
        update_direction: grad.clone(),
        sample_scores: Some(weights.values().to_vec()),
    };
    apply_update(state, grad, config);
    Ok(info)
}

/// One optimization step of the configured method on one batch.
pub fn step(
    model: &ModelSpec,
    state: &mut TrainState,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<StepInfo, MethodsError> {
    if batch.is_empty() {
        return Err(MethodsError::EmptyBatch);
    }
    let levels = state.omega.len();
    match config.method {
        Method::Erm => perturbed_step(model, state, batch, None, None, config),
        Method::Sam => perturbed_step(model, state, batch, None, Some(&config.perturb), config),
        Method::GroupDro => {
            let losses = group_losses(model, &state.theta, batch, levels)?;
            state.omega = weight_update(
                &state.omega,
                &losses,
                config.eta_omega,
                config.weight_update,
            )?;
            let weights = SampleWeights::from_simplex(&state.omega, &batch.severity);
            perturbed_step(model, state, batch, Some(&weights), None, config)
        }
        Method::SharpDroAware => {
            let losses = group_losses(model, &state.theta, batch, levels)?;
            state.omega = weight_update(
                &state.omega,
                &losses,
                config.eta_omega,
                config.weight_update,
            )?;
            let weights = SampleWeights::from_simplex(&state.omega, &batch.severity);
            perturbed_step(
                model,
                state,
                batch,
                Some(&weights),
                Some(&config.perturb),
                config,
            )
        }
        Method::Rex => rex_step(model, state, batch, levels, config),
        Method::SharpDroAgnostic => agnostic_step(model, state, batch, config),
    }
}
