//! Analytic nonconvex/PL minimax testbed: closed-form oracles, the
//! stochastic two-step descent-ascent recursion, step-size validation, and
//! inequality audits for the convergence guarantee.

mod checks;
mod problem;
mod sgda;

pub use checks::{
    check_descent, check_envelope_gradient_identity, check_gradient_bound,
    check_omega_star_lipschitz, check_rate_bound,
    DescentReport, DescentViolation, GradientBoundReport, OmegaLipschitzReport, RateBoundReport,
    DESCENT_SLACK, GRADIENT_BOUND_SLACK,
};
pub use problem::{min_l_star, MinOracle, QuadraticCoupledProblem};
pub use sgda::{
    potential_value, run_sgda_sam, validate_rates, RateCheck, RateParams, Trajectory,
    TrajectoryPoint, ALPHA,
};

use thiserror::Error;

/// Errors from the minimax testbed.
#[derive(Debug, Error)]
pub enum MinimaxError {
    #[error("invalid minimax setup: {detail}")]
    Invalid { detail: String },
    #[error("iteration diverged at step {iteration} (|theta| = {norm:.3e})")]
    Diverged { iteration: usize, norm: f64 },
}
