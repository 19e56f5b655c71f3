//! Adversarial weight perturbations and the sharpness penalty.

use serde::{Deserialize, Serialize};

use super::MethodsError;
use crate::autodiff::{loss_and_grad, loss_only, ModelSpec, ParameterVector, Tensor};

/// How the perturbation direction is formed from the loss gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbKind {
    /// `rho * sign(g)`, with `sign(0) = 0`.
    Sign,
    /// `rho * g / ||g||_2`; a zero gradient gives the zero perturbation.
    L2Normalized,
    /// `rho * g`.
    RawGradient,
}

/// Perturbation rule: direction kind plus scale `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbRule {
    pub kind: PerturbKind,
    pub rho: f64,
}

impl PerturbRule {
    /// `rho = 0` is accepted as the degenerate identity perturbation; it is
    /// what collapses the sharpness-aware methods onto their plain
    /// counterparts.
    pub fn new(kind: PerturbKind, rho: f64) -> Result<Self, MethodsError> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(MethodsError::InvalidConfig {
                detail: format!("rho must be finite and nonnegative, got {rho}"),
            });
        }
        Ok(Self { kind, rho })
    }
}

/// The loss-ascent perturbation for gradient `g` under the given rule.
pub fn epsilon_star(g: &ParameterVector, rule: &PerturbRule) -> ParameterVector {
    let mut eps = g.clone();
    match rule.kind {
        PerturbKind::Sign => {
            for v in eps.values_mut() {
                *v = if *v > 0.0 {
                    rule.rho
                } else if *v < 0.0 {
                    -rule.rho
                } else {
                    0.0
                };
            }
        }
        PerturbKind::L2Normalized => {
            let norm = g.l2_norm();
            let scale = if norm > 0.0 { rule.rho / norm } else { 0.0 };
            for v in eps.values_mut() {
                *v *= scale;
            }
        }
        PerturbKind::RawGradient => {
            for v in eps.values_mut() {
                *v *= rule.rho;
            }
        }
    }
    eps
}

/// Sharpness of an arbitrary differentiable objective at `theta`:
/// the loss change after stepping to `theta + epsilon_star(grad)`.
pub fn sharpness_penalty_of<L, G>(
    loss_at: L,
    grad_at: G,
    theta: &ParameterVector,
    rule: &PerturbRule,
) -> Result<f64, MethodsError>
where
    L: Fn(&ParameterVector) -> Result<f64, MethodsError>,
    G: Fn(&ParameterVector) -> Result<ParameterVector, MethodsError>,
{
    let g = grad_at(theta)?;
    let eps = epsilon_star(&g, rule);
    let perturbed = theta.perturbed(&eps)?;
    Ok(loss_at(&perturbed)? - loss_at(theta)?)
}

/// Sharpness of the weighted cross-entropy on one batch. The perturbation
/// comes from the weighted-batch gradient at `theta`.
pub fn sharpness_penalty(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &Tensor,
    y: &[usize],
    weights: Option<&[f64]>,
    rule: &PerturbRule,
) -> Result<f64, MethodsError> {
    sharpness_penalty_of(
        |t| loss_only(model, t, x, y, weights).map_err(MethodsError::from),
        |t| {
            loss_and_grad(model, t, x, y, weights)
                .map(|(_, g)| g)
                .map_err(MethodsError::from)
        },
        theta,
        rule,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamLayout;

    fn pv(values: Vec<f64>) -> ParameterVector {
        let layout = ParamLayout::new(vec![("v".to_string(), vec![values.len()])]);
        ParameterVector::new(layout, values).unwrap()
    }

    #[test]
    fn sign_rule_uses_elementwise_sign() {
        let rule = PerturbRule::new(PerturbKind::Sign, 0.05).unwrap();
        let eps = epsilon_star(&pv(vec![0.2, -0.5, 0.0]), &rule);
        assert_eq!(eps.values(), &[0.05, -0.05, 0.0]);
    }

    #[test]
    fn l2_rule_normalizes() {
        let rule = PerturbRule::new(PerturbKind::L2Normalized, 0.05).unwrap();
        let eps = epsilon_star(&pv(vec![3.0, 4.0]), &rule);
        assert!((eps.values()[0] - 0.03).abs() < 1e-15);
        assert!((eps.values()[1] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn raw_rule_scales() {
        let rule = PerturbRule::new(PerturbKind::RawGradient, 0.1).unwrap();
        let eps = epsilon_star(&pv(vec![2.0, -1.0]), &rule);
        assert_eq!(eps.values(), &[0.2, -0.1]);
    }

    #[test]
    fn zero_gradient_gives_zero_perturbation() {
        for kind in [PerturbKind::Sign, PerturbKind::L2Normalized, PerturbKind::RawGradient] {
            let rule = PerturbRule::new(kind, 0.05).unwrap();
            let eps = epsilon_star(&pv(vec![0.0, 0.0]), &rule);
            assert_eq!(eps.values(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn quadratic_surrogate_matches_hand_value() {
        // L(t) = t^2 / 2 at t = 1 under the sign rule with rho = 0.05:
        // R = (1.05^2 - 1) / 2 = 0.05125
        let rule = PerturbRule::new(PerturbKind::Sign, 0.05).unwrap();
        let r = sharpness_penalty_of(
            |t| Ok(0.5 * t.values()[0] * t.values()[0]),
            |t| Ok(pv(vec![t.values()[0]])),
            &pv(vec![1.0]),
            &rule,
        )
        .unwrap();
        assert!((r - 0.05125).abs() < 1e-15, "r = {r}");
    }

    #[test]
    fn vanishing_rho_gives_vanishing_sharpness() {
        let rule = PerturbRule::new(PerturbKind::Sign, 1e-8).unwrap();
        let r = sharpness_penalty_of(
            |t| Ok(0.5 * t.values().iter().map(|v| v * v).sum::<f64>()),
            |t| Ok(t.clone()),
            &pv(vec![0.7, -0.3, 1.2]),
            &rule,
        )
        .unwrap();
        assert!(r.abs() < 1e-6, "r = {r}");
    }

    #[test]
    fn negative_rho_is_rejected() {
        assert!(PerturbRule::new(PerturbKind::Sign, -0.1).is_err());
        assert!(PerturbRule::new(PerturbKind::Sign, f64::NAN).is_err());
    }
}
