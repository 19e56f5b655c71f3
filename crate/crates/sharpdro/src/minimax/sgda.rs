//! The stochastic two-step (perturb-then-descend) gradient descent-ascent
//! recursion and the step-size constraint checker.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::problem::{min_l_star, QuadraticCoupledProblem};
use super::MinimaxError;
use crate::rng::{stream, Purpose};

/// Fixed potential-function coefficient used throughout the analysis.
pub const ALPHA: f64 = 1.0 / 16.0;

/// Step sizes and horizon for one verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub eta_theta: f64,
    pub eta_omega: f64,
    pub rho: f64,
    pub batch_m: usize,
    pub iters_t: usize,
    /// Potential coefficient; the analysis fixes this at 1/16.
    pub alpha: f64,
}

impl RateParams {
    pub fn new(
        eta_theta: f64,
        eta_omega: f64,
        rho: f64,
        batch_m: usize,
        iters_t: usize,
    ) -> Self {
        Self {
            eta_theta,
            eta_omega,
            rho,
            batch_m,
            iters_t,
            alpha: ALPHA,
        }
    }
}

/// One recorded iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    /// `L(theta_t, omega_t)`
    pub loss: f64,
    /// `L*(theta_t)`
    pub loss_star: f64,
    /// `||grad L*(theta_t)||^2`
    pub grad_star_sq: f64,
    /// Potential `V_t`
    pub potential: f64,
}

/// Iterates `0..=T` of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    /// Average of `||grad L*(theta_t)||^2` over `t = 0..T-1` (the horizon
    /// the rate bound speaks about; the final iterate is excluded).
    pub fn mean_grad_star_sq(&self) -> f64 {
        let t = self.points.len() - 1;
        self.points[..t]
            .iter()
            .map(|p| p.grad_star_sq)
            .sum::<f64>()
            / t as f64
    }

    /// Largest infinity-norm of `theta` along the run.
    pub fn max_theta_inf_norm(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| p.theta.iter())
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

/// Potential `V = L*(theta) + alpha (L*(theta) - L(theta, omega))`.
pub fn potential_value(
    problem: &QuadraticCoupledProblem,
    theta: &DVector<f64>,
    omega: &DVector<f64>,
) -> f64 {
    let star = problem.l_star(theta);
    star + ALPHA * (star - problem.loss(theta, omega))
}

fn record(
    problem: &QuadraticCoupledProblem,
    theta: &DVector<f64>,
    omega: &DVector<f64>,
) -> TrajectoryPoint {
    let loss = problem.loss(theta, omega);
    let loss_star = problem.l_star(theta);
    let grad_star_sq = problem.grad_l_star(theta).norm_squared();
    TrajectoryPoint {
        theta: theta.iter().cloned().collect(),
        omega: omega.iter().cloned().collect(),
        loss,
        loss_star,
        grad_star_sq,
        potential: loss_star + ALPHA * (loss_star - loss),
    }
}

const DIVERGENCE_NORM: f64 = 1e9;

/// Runs the stochastic recursion
///
/// ```text
/// theta_{t+1/2} = theta_t + rho * g_theta(theta_t, omega_t)
/// theta_{t+1}   = theta_t - eta_theta * g_theta(theta_{t+1/2}, omega_t)
/// omega_{t+1}   = omega_t + eta_omega * g_omega(theta_t, omega_t)
/// ```
///
/// from `init` (the problem's default start when `None`), recording every
/// iterate. Deterministic given the seed.
pub fn run_sgda_sam(
    problem: &QuadraticCoupledProblem,
    rates: &RateParams,
    init: Option<(DVector<f64>, DVector<f64>)>,
    seed: u64,
) -> Result<Trajectory, MinimaxError> {
    let (mut theta, mut omega) = init.unwrap_or_else(|| problem.default_init());
    if theta.len() != problem.dim_theta() || omega.len() != problem.dim_omega() {
        return Err(MinimaxError::Invalid {
            detail: "initial point dimensions do not match the problem".to_string(),
        });
    }
    let mut points = Vec::with_capacity(rates.iters_t + 1);
    points.push(record(problem, &theta, &omega));
    for t in 0..rates.iters_t {
        let mut rng = stream(seed, Purpose::MinimaxNoise, t as u64);
        let (g_theta_first, g_omega) =
            problem.stochastic_grads(&theta, &omega, rates.batch_m, &mut rng);
        let theta_half = &theta + rates.rho * &g_theta_first;
        let (g_theta_perturbed, _) =
            problem.stochastic_grads(&theta_half, &omega, rates.batch_m, &mut rng);
        theta -= rates.eta_theta * g_theta_perturbed;
        omega += rates.eta_omega * g_omega;
        if theta.norm() > DIVERGENCE_NORM {
            return Err(MinimaxError::Diverged {
                iteration: t,
                norm: theta.norm(),
            });
        }
        points.push(record(problem, &theta, &omega));
    }
    Ok(Trajectory { points })
}

/// Outcome of the step-size constraint audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateCheck {
    pub violations: Vec<String>,
    /// `L*(theta_0) - min_theta L*` used by the sigma-dependent constraint.
    pub delta_l_star: f64,
    pub min_l_star: f64,
}

impl RateCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every step-size constraint the convergence guarantee requires.
/// Boundary values pass. The noise-dependent cap uses the problem's default
/// starting point and a grid-plus-descent oracle for `min L*`.
pub fn validate_rates(problem: &QuadraticCoupledProblem, rates: &RateParams) -> RateCheck {
    let l = problem.smoothness();
    let kappa = problem.kappa();
    let mut violations = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            violations.push(msg);
        }
    };

    check(
        rates.alpha == ALPHA,
        format!("alpha = 1/16 (got {})", rates.alpha),
    );
    check(
        rates.eta_theta > 0.0 && rates.eta_omega > 0.0 && rates.rho >= 0.0,
        format!(
            "positive step sizes (eta_theta = {}, eta_omega = {}, rho = {})",
            rates.eta_theta, rates.eta_omega, rates.rho
        ),
    );
    check(
        rates.batch_m >= 1 && rates.iters_t >= 1,
        format!("M >= 1 and T >= 1 (got M = {}, T = {})", rates.batch_m, rates.iters_t),
    );
    check(
        rates.rho * l <= 1.0 / 16.0,
        format!("rho * l <= 1/16 (got {} > {})", rates.rho * l, 1.0 / 16.0),
    );
    let two_step = rates.eta_theta * (2.0 * rates.rho * l + 1.0).powi(2) * kappa * l;
    check(
        two_step <= 1.0 / 64.0,
        format!("eta_theta (2 rho l + 1)^2 kappa l <= 1/64 (got {two_step})"),
    );
    let curvature = kappa * kappa * rates.eta_theta * l;
    check(
        curvature <= 1.0 / 128.0,
        format!("kappa^2 eta_theta l <= 1/128 (got {curvature})"),
    );
    check(
        rates.rho <= rates.eta_theta / (2.0 * l),
        format!(
            "rho <= eta_theta / (2 l) (got {} > {})",
            rates.rho,
            rates.eta_theta / (2.0 * l)
        ),
    );
    check(
        rates.eta_omega <= 64.0 * kappa * kappa * rates.eta_theta,
        format!(
            "eta_omega <= 64 kappa^2 eta_theta (got {} > {})",
            rates.eta_omega,
            64.0 * kappa * kappa * rates.eta_theta
        ),
    );
    let cap = 1.0 / (128.0 * kappa * kappa * l);
    check(
        rates.eta_theta <= cap,
        format!("eta_theta <= 1/(128 kappa^2 l) (got {} > {cap})", rates.eta_theta),
    );

    // noise-dependent cap on eta_theta; vacuous at sigma = 0
    let (theta0, _) = problem.default_init();
    let box_halfwidth = 2.0_f64.max(2.0 * theta0.amax());
    let oracle = min_l_star(problem, box_halfwidth, 200_000);
    let delta_l_star = problem.l_star(&theta0) - oracle.value;
    if problem.sigma() > 0.0 {
        let sigma_sq = problem.assumption_sigma_sq();
        let cap = (rates.batch_m as f64 * delta_l_star
            / (132.0 * rates.iters_t as f64 * kappa.powi(4) * l * sigma_sq))
            .sqrt();
        check(
            rates.eta_theta <= cap,
            format!(
                "eta_theta <= sqrt(M dL* / (132 T kappa^4 l sigma^2)) (got {} > {cap})",
                rates.eta_theta
            ),
        );
    }

    RateCheck {
        violations,
        delta_l_star,
        min_l_star: oracle.value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_smoothness_problem() -> QuadraticCoupledProblem {
        // l = max(0.5 + 0, 0.5) + 0.5 = 1, mu = 0.5, kappa = 2
        QuadraticCoupledProblem::scaled_identity(2, 2, 0.5, 0.0, 0.5, 0.5, 0.0).unwrap()
    }

    #[test]
    fn worked_constraint_example_passes() {
        let p = unit_smoothness_problem();
        assert!((p.smoothness() - 1.0).abs() < 1e-12);
        assert!((p.kappa() - 2.0).abs() < 1e-12);
        let rates = RateParams::new(0.001, 0.1, 0.0005, 1, 1000);
        let check = validate_rates(&p, &rates);
        assert!(check.passed(), "violations: {:?}", check.violations);
    }

    #[test]
    fn oversized_rho_is_flagged() {
        let p = unit_smoothness_problem();
        let rates = RateParams::new(0.001, 0.1, 0.2, 1, 1000);
        let check = validate_rates(&p, &rates);
        assert!(!check.passed());
        assert!(
            check.violations.iter().any(|v| v.contains("rho * l <= 1/16")),
            "violations: {:?}",
            check.violations
        );
    }

    #[test]
    fn boundary_eta_omega_is_inclusive() {
        let p = unit_smoothness_problem();
        let eta_theta = 0.001;
        let rates = RateParams::new(eta_theta, 64.0 * 4.0 * eta_theta, 0.0005, 1, 1000);
        let check = validate_rates(&p, &rates);
        assert!(check.passed(), "violations: {:?}", check.violations);
    }

    #[test]
    fn stationary_start_stays_fixed() {
        // sigma = 0, theta_0 stationary for L*, omega_0 = omega*(theta_0):
        // both gradients vanish, so the trajectory is constant
        let p = QuadraticCoupledProblem::scaled_identity(2, 2, 0.5, 0.0, 0.5, 1.0, 0.0).unwrap();
        let theta0 = DVector::zeros(2);
        let omega0 = p.omega_star(&theta0);
        let rates = RateParams::new(0.002, 0.05, 0.0005, 1, 50);
        let traj = run_sgda_sam(&p, &rates, Some((theta0, omega0)), 3).unwrap();
        for point in &traj.points {
            assert_eq!(point.grad_star_sq, 0.0);
            assert!(point.theta.iter().all(|&v| v == 0.0));
            assert!(point.omega.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zero_rho_zero_sigma_reduces_to_plain_gda() {
        let p = QuadraticCoupledProblem::scaled_identity(3, 2, 0.4, 0.2, 0.3, 1.0, 0.0).unwrap();
        let rates = RateParams::new(0.002, 0.05, 0.0, 1, 200);
        let traj = run_sgda_sam(&p, &rates, None, 7).unwrap();

        // independent plain gradient descent-ascent loop
        let (mut theta, mut omega) = p.default_init();
        for point in &traj.points {
            for (a, b) in point.theta.iter().zip(theta.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for (a, b) in point.omega.iter().zip(omega.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            let gt = p.grad_theta(&theta, &omega);
            let gw = p.grad_omega(&theta, &omega);
            theta -= rates.eta_theta * gt;
            omega += rates.eta_omega * gw;
        }
    }

    #[test]
    fn trajectory_is_deterministic_and_full_length() {
        let p = QuadraticCoupledProblem::default_problem();
        let rates = RateParams::new(0.0015, 0.1, 0.0004, 1, 100);
        let a = run_sgda_sam(&p, &rates, None, 11).unwrap();
        let b = run_sgda_sam(&p, &rates, None, 11).unwrap();
        assert_eq!(a.points.len(), 101);
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.theta, y.theta);
            assert_eq!(x.omega, y.omega);
        }
    }

    #[test]
    fn potential_dominates_the_envelope() {
        let p = QuadraticCoupledProblem::default_problem();
        let theta = DVector::from_vec(vec![0.5, -0.3, 1.0, 0.1]);
        let omega_star = p.omega_star(&theta);
        // at omega* the gap vanishes
        let v = potential_value(&p, &theta, &omega_star);
        assert!((v - p.l_star(&theta)).abs() < 1e-12);
        // anywhere else V >= L*
        for shift in [-1.0, -0.2, 0.4, 2.0] {
            let omega = omega_star.map(|w| w + shift);
            assert!(potential_value(&p, &theta, &omega) >= p.l_star(&theta));
        }
        // origin with a = 0
        let p0 = QuadraticCoupledProblem::scaled_identity(2, 2, 0.5, 0.0, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(
            potential_value(&p0, &DVector::zeros(2), &DVector::zeros(2)),
            0.0
        );
    }

    #[test]
    fn long_noisy_run_decreases_the_running_mean() {
        let p = QuadraticCoupledProblem::default_problem();
        let rates = RateParams::new(0.0015, 0.1, 0.0004, 1, 200_000);
        let traj = run_sgda_sam(&p, &rates, None, 17).unwrap();
        let running_mean = |t: usize| -> f64 {
            traj.points[..t].iter().map(|p| p.grad_star_sq).sum::<f64>() / t as f64
        };
        let early = running_mean(1000);
        let late = running_mean(200_000);
        assert!(
            late < early,
            "running mean did not decrease: early {early}, late {late}"
        );
    }
}
