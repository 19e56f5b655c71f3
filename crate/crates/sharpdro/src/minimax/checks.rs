//! Inequality audits along trajectories: per-step descent, the perturbed
//! gradient second-moment bound, and the final rate bound.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::problem::{MinOracle, QuadraticCoupledProblem};
use super::sgda::{RateParams, Trajectory};
use super::MinimaxError;
use crate::rng::{stream, Purpose};

/// Absolute slack granted to the per-step descent inequality.
pub const DESCENT_SLACK: f64 = 1e-9;
/// Relative slack granted to the Monte Carlo gradient bound.
pub const GRADIENT_BOUND_SLACK: f64 = 0.05;

/// One descent-inequality violation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentViolation {
    pub step: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Report of the per-step descent audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentReport {
    pub steps_checked: usize,
    pub violations: Vec<DescentViolation>,
    /// Loosest margin `rhs - lhs` observed (the closest call).
    pub min_margin: f64,
}

impl DescentReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits the per-step envelope-descent inequality along a deterministic
/// (`sigma = 0`) trajectory:
///
/// ```text
/// L*(t+1) <= L*(t) - (eta/2) (1 - 5 rho l - 2 L eta c) ||grad L*(t)||^2
///          + [(eta/2)(1 + rho l / 2) + L eta^2 c] ||grad L*(t) - grad_theta L(t)||^2
/// ```
///
/// with `c = 4 rho^2 l^2 + 2 rho l + 2` and `L = l + l kappa / 2`.
pub fn check_descent(
    trajectory: &Trajectory,
    problem: &QuadraticCoupledProblem,
    rates: &RateParams,
) -> Result<DescentReport, MinimaxError> {
    if problem.sigma() != 0.0 {
        return Err(MinimaxError::Invalid {
            detail: "descent audit requires a deterministic problem (sigma = 0)".to_string(),
        });
    }
    let l = problem.smoothness();
    let kappa = problem.kappa();
    let big_l = l + l * kappa / 2.0;
    let c = 4.0 * rates.rho * rates.rho * l * l + 2.0 * rates.rho * l + 2.0;
    let eta = rates.eta_theta;
    let descent_coeff = (eta / 2.0) * (1.0 - 5.0 * rates.rho * l - 2.0 * big_l * eta * c);
    let gap_coeff = (eta / 2.0) * (1.0 + 0.5 * rates.rho * l) + big_l * eta * eta * c;

    let mut violations = Vec::new();
    let mut min_margin = f64::INFINITY;
    for (t, pair) in trajectory.points.windows(2).enumerate() {
        let theta_t = DVector::from_vec(pair[0].theta.clone());
        let omega_t = DVector::from_vec(pair[0].omega.clone());
        let grad_star = problem.grad_l_star(&theta_t);
        let gap_sq = (&grad_star - problem.grad_theta(&theta_t, &omega_t)).norm_squared();
        let rhs = pair[0].loss_star - descent_coeff * grad_star.norm_squared()
            + gap_coeff * gap_sq;
        let lhs = pair[1].loss_star;
        let margin = rhs - lhs;
        min_margin = min_margin.min(margin);
        if lhs > rhs + DESCENT_SLACK {
            violations.push(DescentViolation { step: t, lhs, rhs });
        }
    }
    Ok(DescentReport {
        steps_checked: trajectory.points.len() - 1,
        violations,
        min_margin,
    })
}

/// Report of the perturbed-gradient second-moment bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientBoundReport {
    pub lhs_monte_carlo: f64,
    pub rhs_bound: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Monte Carlo audit of
/// `E ||g(theta + rho g(theta, omega), omega)||^2 <= (4 rho^2 l^2 + 2 rho l + 2)
/// ||grad_theta L||^2 + (5 rho^2 l^2 + 2) sigma^2 / M` at a fixed point.
pub fn check_gradient_bound(
    problem: &QuadraticCoupledProblem,
    rates: &RateParams,
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    n_samples: usize,
    seed: u64,
) -> GradientBoundReport {
    let mut total = 0.0;
    for i in 0..n_samples {
        let mut rng = stream(seed, Purpose::MinimaxNoise, i as u64);
        let (g1, _) = problem.stochastic_grads(theta, omega, rates.batch_m, &mut rng);
        let theta_half = theta + rates.rho * g1;
        let (g2, _) = problem.stochastic_grads(&theta_half, omega, rates.batch_m, &mut rng);
        total += g2.norm_squared();
    }
    let lhs = total / n_samples as f64;
    let l = problem.smoothness();
    let rl = rates.rho * l;
    let exact_grad_sq = problem.grad_theta(theta, omega).norm_squared();
    let rhs = (4.0 * rl * rl + 2.0 * rl + 2.0) * exact_grad_sq
        + (5.0 * rl * rl + 2.0) * problem.assumption_sigma_sq() / rates.batch_m as f64;
    GradientBoundReport {
        lhs_monte_carlo: lhs,
        rhs_bound: rhs,
        samples: n_samples,
        pass: lhs <= rhs * (1.0 + GRADIENT_BOUND_SLACK) + 1e-9,
    }
}

/// Report of the averaged-stationarity rate bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateBoundReport {
    /// Ensemble mean of `(1/T) sum_t ||grad L*(theta_t)||^2`.
    pub lhs_mean: f64,
    pub rhs_bound: f64,
    pub ensemble_size: usize,
    pub horizon: usize,
    /// Largest `|theta|` coordinate seen; must stay inside the oracle box.
    pub max_theta_inf_norm: f64,
    pub oracle: MinOracle,
    pub pass: bool,
}

/// Audits the rate bound
///
/// ```text
/// mean_t E ||grad L*(theta_t)||^2 <= 80/(11 eta T) (L*(theta_0) - min L*)
///                                  + 5/(11 eta T) Delta_0
///                                  + 960 kappa^4 l eta sigma^2 / M
/// ```
///
/// over an ensemble of trajectories sharing one starting point.
pub fn check_rate_bound(
    trajectories: &[Trajectory],
    problem: &QuadraticCoupledProblem,
    rates: &RateParams,
    oracle: &MinOracle,
) -> Result<RateBoundReport, MinimaxError> {
    if trajectories.is_empty() {
        return Err(MinimaxError::Invalid {
            detail: "rate bound needs at least one trajectory".to_string(),
        });
    }
    let horizon = trajectories[0].points.len() - 1;
    if trajectories.iter().any(|t| t.points.len() != horizon + 1) {
        return Err(MinimaxError::Invalid {
            detail: "all trajectories must share one horizon".to_string(),
        });
    }
    let lhs_mean = trajectories
        .iter()
        .map(Trajectory::mean_grad_star_sq)
        .sum::<f64>()
        / trajectories.len() as f64;

    let start = &trajectories[0].points[0];
    let l_star_0 = start.loss_star;
    let delta_0 = start.loss_star - start.loss;
    let l = problem.smoothness();
    let kappa = problem.kappa();
    let eta_t = rates.eta_theta * horizon as f64;
    // the optimality gap is nonnegative by definition; the grid-and-polish
    // oracle can overshoot the true minimum by rounding dust
    let gap = (l_star_0 - oracle.value).max(0.0);
    let rhs = 80.0 / (11.0 * eta_t) * gap
        + 5.0 / (11.0 * eta_t) * delta_0
        + 960.0 * kappa.powi(4) * l * rates.eta_theta * problem.assumption_sigma_sq()
            / rates.batch_m as f64;

    let max_theta = trajectories
        .iter()
        .map(Trajectory::max_theta_inf_norm)
        .fold(0.0_f64, f64::max);

    Ok(RateBoundReport {
        lhs_mean,
        rhs_bound: rhs,
        ensemble_size: trajectories.len(),
        horizon,
        max_theta_inf_norm: max_theta,
        oracle: oracle.clone(),
        pass: lhs_mean <= rhs,
    })
}

/// Closed-form audit of the inner maximizer's Lipschitz continuity, plus a
/// flag for the analysis' stated `l/(2 mu)` constant, which is tighter than
/// the provable `||A|| / mu <= l / mu` and is reported rather than assumed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaLipschitzReport {
    pub pairs: usize,
    /// `||A|| / mu`, the constant the audit enforces.
    pub enforced_constant: f64,
    pub holds_at_enforced: bool,
    /// Whether `l / (2 mu)` also covered every sampled pair.
    pub holds_at_half_kappa: bool,
    pub max_ratio: f64,
}

/// Closed-form audit of the envelope-gradient identity
/// `grad L*(theta) = grad_theta L(theta, omega*(theta))` at random points;
/// returns the worst absolute deviation.
pub fn check_envelope_gradient_identity(
    problem: &QuadraticCoupledProblem,
    points: usize,
    seed: u64,
) -> f64 {
    use rand::Rng;
    let mut worst = 0.0_f64;
    for i in 0..points {
        let mut rng = stream(seed, Purpose::Test, i as u64);
        let theta = DVector::from_fn(problem.dim_theta(), |_, _| rng.gen_range(-3.0..3.0));
        let omega_star = problem.omega_star(&theta);
        let diff = (problem.grad_l_star(&theta) - problem.grad_theta(&theta, &omega_star)).norm();
        worst = worst.max(diff);
    }
    worst
}

pub fn check_omega_star_lipschitz(
    problem: &QuadraticCoupledProblem,
    pairs: usize,
    seed: u64,
) -> OmegaLipschitzReport {
    use rand::Rng;
    let enforced = problem.coupling_norm() / problem.mu();
    let half_kappa = problem.kappa() / 2.0;
    let mut max_ratio = 0.0_f64;
    for i in 0..pairs {
        let mut rng = stream(seed, Purpose::Test, i as u64);
        let t1 = DVector::from_fn(problem.dim_theta(), |_, _| rng.gen_range(-5.0..5.0));
        let t2 = DVector::from_fn(problem.dim_theta(), |_, _| rng.gen_range(-5.0..5.0));
        let denom = (&t1 - &t2).norm();
        if denom == 0.0 {
            continue;
        }
        let ratio = (problem.omega_star(&t1) - problem.omega_star(&t2)).norm() / denom;
        max_ratio = max_ratio.max(ratio);
    }
    OmegaLipschitzReport {
        pairs,
        enforced_constant: enforced,
        holds_at_enforced: max_ratio <= enforced + 1e-12,
        holds_at_half_kappa: max_ratio <= half_kappa + 1e-12,
        max_ratio,
    }
}
