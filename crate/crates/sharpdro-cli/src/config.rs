//! Experiment configuration: TOML schema, defaults, validation, and
//! content hashing.
//!
//! The schema is closed: unknown keys are rejected. Every key has a
//! documented default except where a method requires an explicit choice
//! (weighted methods must state `train.eta_omega` in the file). Hashing
//! canonicalizes the resolved configuration to JSON with sorted keys, so
//! the hash is stable under key reordering in the source file.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sharpdro::autodiff::{Activation, ModelSpec};
use sharpdro::datagen::{CorruptionKind, SeverityDistribution, SyntheticSpec, TailMode};
use sharpdro::methods::{Method, PerturbKind, PerturbRule, TrainConfig, WeightUpdateMode};
use sharpdro::minimax::{QuadraticCoupledProblem, RateParams};

use crate::CliError;

/// Data source selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Synthetic,
    Csv,
}

/// Corruption family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionName {
    AdditiveGaussian,
    Quantize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailModeName {
    Clamp,
    Renormalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbRuleName {
    Sign,
    L2Normalized,
    RawGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightUpdateName {
    Exponentiated,
    AdditiveProjected,
}

/// Resolved `[data]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub kind: DataKind,
    pub lambda: f64,
    pub max_severity: usize,
    pub mode: TailModeName,
    pub corruption: CorruptionName,
    pub sigma_unit: f64,
    pub base_levels: u32,
    pub n_train: usize,
    pub n_test_per_severity: usize,
    pub dim: usize,
    pub classes: usize,
    pub class_separation: f64,
    pub within_class_sigma: f64,
    pub seed: u64,
    pub csv_path: Option<String>,
    pub label_column: Option<String>,
}

/// Resolved `[model]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
}

/// Resolved `[train]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub method: Method,
    pub eta_theta: f64,
    pub eta_omega: f64,
    pub rho: f64,
    pub perturb_rule: PerturbRuleName,
    pub rex_beta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_update: WeightUpdateName,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub reuse_score_epsilon: bool,
}

/// Resolved `[minimax]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxConfig {
    pub dim_theta: usize,
    pub dim_omega: usize,
    pub h_diag: f64,
    pub sine_amplitude: f64,
    pub coupling: f64,
    pub mu: f64,
    pub sigma: f64,
    pub eta_theta: f64,
    pub eta_omega: f64,
    pub rho: f64,
    pub batch_m: usize,
    pub iters_t: usize,
    pub seeds: usize,
    pub seed: u64,
    pub descent_steps: usize,
    pub grad_bound_samples: usize,
    pub lipschitz_pairs: usize,
    pub grid_budget: usize,
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub minimax: MinimaxConfig,
}

// ---------------------------------------------------------------------
// raw (file-level) schema: everything optional, unknown keys rejected
// ---------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    kind: Option<DataKind>,
    lambda: Option<f64>,
    max_severity: Option<usize>,
    mode: Option<TailModeName>,
    corruption: Option<CorruptionName>,
    sigma_unit: Option<f64>,
    base_levels: Option<u32>,
    n_train: Option<usize>,
    n_test_per_severity: Option<usize>,
    dim: Option<usize>,
    classes: Option<usize>,
    class_separation: Option<f64>,
    within_class_sigma: Option<f64>,
    seed: Option<u64>,
    csv_path: Option<String>,
    label_column: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    hidden_dims: Option<Vec<usize>>,
    activation: Option<Activation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    method: Option<Method>,
    eta_theta: Option<f64>,
    eta_omega: Option<f64>,
    rho: Option<f64>,
    perturb_rule: Option<PerturbRuleName>,
    rex_beta: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    weight_update: Option<WeightUpdateName>,
    momentum: Option<f64>,
    weight_decay: Option<f64>,
    seed: Option<u64>,
    reuse_score_epsilon: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMinimax {
    dim_theta: Option<usize>,
    dim_omega: Option<usize>,
    h_diag: Option<f64>,
    sine_amplitude: Option<f64>,
    coupling: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    eta_theta: Option<f64>,
    eta_omega: Option<f64>,
    rho: Option<f64>,
    batch_m: Option<usize>,
    iters_t: Option<usize>,
    seeds: Option<usize>,
    seed: Option<u64>,
    descent_steps: Option<usize>,
    grad_bound_samples: Option<usize>,
    lipschitz_pairs: Option<usize>,
    grid_budget: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: Option<RawData>,
    model: Option<RawModel>,
    train: Option<RawTrain>,
    minimax: Option<RawMinimax>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataConfig {
                kind: DataKind::Synthetic,
                lambda: 1.0,
                max_severity: 5,
                mode: TailModeName::Renormalize,
                corruption: CorruptionName::AdditiveGaussian,
                sigma_unit: 0.35,
                base_levels: 16,
                n_train: 3000,
                n_test_per_severity: 400,
                dim: 8,
                classes: 3,
                class_separation: 2.2,
                within_class_sigma: 0.5,
                seed: 7,
                csv_path: None,
                label_column: None,
            },
            model: ModelConfig {
                hidden_dims: vec![32],
                activation: Activation::Tanh,
            },
            train: TrainSection {
                method: Method::Erm,
                eta_theta: 0.03,
                eta_omega: 0.01,
                rho: 0.05,
                perturb_rule: PerturbRuleName::Sign,
                rex_beta: 1.0,
                batch_size: 16,
                epochs: 30,
                weight_update: WeightUpdateName::Exponentiated,
                momentum: 0.0,
                weight_decay: 0.0,
                seed: 7,
                reuse_score_epsilon: false,
            },
            minimax: MinimaxConfig {
                dim_theta: 4,
                dim_omega: 4,
                h_diag: 0.5,
                sine_amplitude: 0.25,
                coupling: 0.5,
                mu: 1.0,
                sigma: 0.1,
                eta_theta: 0.0015,
                eta_omega: 0.1,
                rho: 0.0004,
                batch_m: 1,
                iters_t: 10_000,
                seeds: 20,
                seed: 1,
                descent_steps: 1000,
                grad_bound_samples: 100_000,
                lipschitz_pairs: 1000,
                grid_budget: 200_000,
            },
        }
    }
}

fn usage(detail: String) -> CliError {
    CliError::Usage(detail)
}

/// Parses a TOML configuration, applies defaults, and validates.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| usage(format!("config: {e}")))?;
    let mut cfg = ExperimentConfig::default();

    let weighted_method_needs_eta_omega = {
        let explicit_method = raw.train.as_ref().and_then(|t| t.method);
        let explicit_eta_omega = raw.train.as_ref().and_then(|t| t.eta_omega).is_some();
        match explicit_method {
            Some(m) if m.uses_group_weights() && !explicit_eta_omega => Some(m),
            _ => None,
        }
    };
    if let Some(m) = weighted_method_needs_eta_omega {
        return Err(usage(format!(
            "config: train.eta_omega is required when train.method = {m:?} is set explicitly"
        )));
    }

    if let Some(d) = raw.data {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = d.$field {
                    cfg.data.$field = v;
                }
            };
        }
        take!(kind);
        take!(lambda);
        take!(max_severity);
        take!(mode);
        take!(corruption);
        take!(sigma_unit);
        take!(base_levels);
        take!(n_train);
        take!(n_test_per_severity);
        take!(dim);
        take!(classes);
        take!(class_separation);
        take!(within_class_sigma);
        take!(seed);
        cfg.data.csv_path = d.csv_path.or(cfg.data.csv_path);
        cfg.data.label_column = d.label_column.or(cfg.data.label_column);
    }
    if let Some(m) = raw.model {
        if let Some(v) = m.hidden_dims {
            cfg.model.hidden_dims = v;
        }
        if let Some(v) = m.activation {
            cfg.model.activation = v;
        }
    }
    if let Some(t) = raw.train {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = t.$field {
                    cfg.train.$field = v;
                }
            };
        }
        take!(method);
        take!(eta_theta);
        take!(eta_omega);
        take!(rho);
        take!(perturb_rule);
        take!(rex_beta);
        take!(batch_size);
        take!(epochs);
        take!(weight_update);
        take!(momentum);
        take!(weight_decay);
        take!(seed);
        take!(reuse_score_epsilon);
    }
    if let Some(m) = raw.minimax {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = m.$field {
                    cfg.minimax.$field = v;
                }
            };
        }
        take!(dim_theta);
        take!(dim_omega);
        take!(h_diag);
        take!(sine_amplitude);
        take!(coupling);
        take!(mu);
        take!(sigma);
        take!(eta_theta);
        take!(eta_omega);
        take!(rho);
        take!(batch_m);
        take!(iters_t);
        take!(seeds);
        take!(seed);
        take!(descent_steps);
        take!(grad_bound_samples);
        take!(lipschitz_pairs);
        take!(grid_budget);
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let d = &cfg.data;
    if !(d.lambda > 0.0) {
        return Err(usage(format!("config: data.lambda must be positive, got {}", d.lambda)));
    }
    if d.kind == DataKind::Csv && (d.csv_path.is_none() || d.label_column.is_none()) {
        return Err(usage(
            "config: data.csv_path and data.label_column are required when data.kind = \"csv\""
                .to_string(),
        ));
    }
    if d.classes < 2 {
        return Err(usage(format!("config: data.classes must be >= 2, got {}", d.classes)));
    }
    if d.dim < 1 || d.n_train < 1 || d.n_test_per_severity < 1 {
        return Err(usage(
            "config: data.dim and sample counts must be >= 1".to_string(),
        ));
    }
    let t = &cfg.train;
    if !(t.eta_theta > 0.0) {
        return Err(usage(format!(
            "config: train.eta_theta must be positive, got {}",
            t.eta_theta
        )));
    }
    if !(t.eta_omega > 0.0) {
        return Err(usage(format!(
            "config: train.eta_omega must be positive, got {}",
            t.eta_omega
        )));
    }
    if t.rho < 0.0 {
        return Err(usage(format!("config: train.rho must be nonnegative, got {}", t.rho)));
    }
    if t.batch_size < 1 {
        return Err(usage("config: train.batch_size must be >= 1".to_string()));
    }
    let m = &cfg.minimax;
    if !(m.mu > 0.0) || m.sigma < 0.0 {
        return Err(usage(
            "config: minimax.mu must be positive and minimax.sigma nonnegative".to_string(),
        ));
    }
    if m.dim_theta < 1 || m.dim_omega < 1 || m.iters_t < 1 || m.batch_m < 1 || m.seeds < 1 {
        return Err(usage(
            "config: minimax dimensions, horizon, batch, and seeds must be >= 1".to_string(),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form (sorted keys), hex-encoded.
    pub fn content_hash(&self) -> String {
        let value =
            serde_json::to_value(self).expect("config serialization cannot fail");
        let canonical = serde_json::to_string(&value).expect("canonical form");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Canonical TOML rendering of the resolved configuration.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn severity_distribution(&self) -> Result<SeverityDistribution, CliError> {
        let mode = match self.data.mode {
            TailModeName::Clamp => TailMode::Clamp,
            TailModeName::Renormalize => TailMode::Renormalize,
        };
        SeverityDistribution::new(self.data.lambda, self.data.max_severity, mode)
            .map_err(|e| usage(format!("config: data.lambda: {e}")))
    }

    pub fn corruption_kind(&self) -> CorruptionKind {
        match self.data.corruption {
            CorruptionName::AdditiveGaussian => CorruptionKind::AdditiveGaussian {
                sigma_unit: self.data.sigma_unit,
            },
            CorruptionName::Quantize => CorruptionKind::Quantize {
                base_levels: self.data.base_levels,
            },
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            num_classes: self.data.classes,
            dim: self.data.dim,
            class_separation: self.data.class_separation,
            within_class_sigma: self.data.within_class_sigma,
            n_train: self.data.n_train,
            n_test_per_severity: self.data.n_test_per_severity,
        }
    }

    pub fn model_spec(&self, input_dim: usize, classes: usize) -> Result<ModelSpec, CliError> {
        ModelSpec::new(
            input_dim,
            self.model.hidden_dims.clone(),
            classes,
            self.model.activation,
        )
        .map_err(|e| usage(format!("config: model: {e}")))
    }

    pub fn perturb_rule(&self) -> Result<PerturbRule, CliError> {
        let kind = match self.train.perturb_rule {
            PerturbRuleName::Sign => PerturbKind::Sign,
            PerturbRuleName::L2Normalized => PerturbKind::L2Normalized,
            PerturbRuleName::RawGradient => PerturbKind::RawGradient,
        };
        PerturbRule::new(kind, self.train.rho)
            .map_err(|e| usage(format!("config: train.rho: {e}")))
    }

    /// The core-layer training configuration, with optional overrides for
    /// fan-out subcommands.
    pub fn train_config(
        &self,
        method: Option<Method>,
        seed: Option<u64>,
        rho: Option<f64>,
    ) -> Result<TrainConfig, CliError> {
        let mut rule = self.perturb_rule()?;
        if let Some(r) = rho {
            rule = PerturbRule::new(rule.kind, r)
                .map_err(|e| usage(format!("sweep rho: {e}")))?;
        }
        Ok(TrainConfig {
            method: method.unwrap_or(self.train.method),
            eta_theta: self.train.eta_theta,
            eta_omega: self.train.eta_omega,
            perturb: rule,
            rex_beta: self.train.rex_beta,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            weight_update: match self.train.weight_update {
                WeightUpdateName::Exponentiated => WeightUpdateMode::Exponentiated,
                WeightUpdateName::AdditiveProjected => WeightUpdateMode::AdditiveProjected,
            },
            momentum: self.train.momentum,
            weight_decay: self.train.weight_decay,
            seed: seed.unwrap_or(self.train.seed),
            reuse_score_epsilon: self.train.reuse_score_epsilon,
        })
    }

    pub fn minimax_problem(&self) -> Result<QuadraticCoupledProblem, CliError> {
        QuadraticCoupledProblem::scaled_identity(
            self.minimax.dim_theta,
            self.minimax.dim_omega,
            self.minimax.h_diag,
            self.minimax.sine_amplitude,
            self.minimax.coupling,
            self.minimax.mu,
            self.minimax.sigma,
        )
        .map_err(|e| usage(format!("config: minimax: {e}")))
    }

    pub fn rate_params(&self) -> RateParams {
        RateParams::new(
            self.minimax.eta_theta,
            self.minimax.eta_omega,
            self.minimax.rho,
            self.minimax.batch_m,
            self.minimax.iters_t,
        )
    }
}
