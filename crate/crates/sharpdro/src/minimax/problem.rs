//! Analytic minimax instance with closed-form oracles.
//!
//! The objective is
//!
//! ```text
//! L(theta, omega) = 1/2 theta' H theta + a * sum_i sin(theta_i)
//!                   + theta' A omega - mu/2 ||omega||^2
//! ```
//!
//! It is nonconvex in `theta` once the sine amplitude exceeds the smallest
//! eigenvalue of `H`, exactly `mu`-strongly concave (hence `mu`-PL) in
//! `omega`, and every quantity the convergence analysis needs — the inner
//! maximizer, the envelope, its gradient, the smoothness constant — has a
//! closed form, so the analysis can be audited step by step.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::MinimaxError;

/// Coupled quadratic-plus-sine minimax problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoupledProblem {
    h: DMatrix<f64>,
    sine_amplitude: f64,
    coupling: DMatrix<f64>,
    mu: f64,
    sigma: f64,
    h_norm: f64,
    coupling_norm: f64,
}

impl QuadraticCoupledProblem {
    pub fn new(
        h: DMatrix<f64>,
        sine_amplitude: f64,
        coupling: DMatrix<f64>,
        mu: f64,
        sigma: f64,
    ) -> Result<Self, MinimaxError> {
        if !h.is_square() || h.nrows() != coupling.nrows() {
            return Err(MinimaxError::Invalid {
                detail: format!(
                    "H must be square and match the coupling rows: H is {}x{}, A is {}x{}",
                    h.nrows(),
                    h.ncols(),
                    coupling.nrows(),
                    coupling.ncols()
                ),
            });
        }
        let asym = (&h - h.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(MinimaxError::Invalid {
                detail: format!("H must be symmetric (max asymmetry {asym})"),
            });
        }
        if !(mu > 0.0) {
            return Err(MinimaxError::Invalid {
                detail: format!("mu must be positive, got {mu}"),
            });
        }
        if sine_amplitude < 0.0 || sigma < 0.0 {
            return Err(MinimaxError::Invalid {
                detail: "sine amplitude and sigma must be nonnegative".to_string(),
            });
        }
        let h_norm = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0_f64, |m, &e| m.max(e.abs()));
        let coupling_norm = coupling
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0_f64, |m, &s| m.max(s));
        Ok(Self {
            h,
            sine_amplitude,
            coupling,
            mu,
            sigma,
            h_norm,
            coupling_norm,
        })
    }

    /// Scaled-identity instance: `H = h_diag I`, `A = coupling_diag I`.
    pub fn scaled_identity(
        dim_theta: usize,
        dim_omega: usize,
        h_diag: f64,
        sine_amplitude: f64,
        coupling_diag: f64,
        mu: f64,
        sigma: f64,
    ) -> Result<Self, MinimaxError> {
        let h = DMatrix::identity(dim_theta, dim_theta) * h_diag;
        let mut a = DMatrix::zeros(dim_theta, dim_omega);
        for i in 0..dim_theta.min(dim_omega) {
            a[(i, i)] = coupling_diag;
        }
        Self::new(h, sine_amplitude, a, mu, sigma)
    }

    /// The default verification instance.
    pub fn default_problem() -> Self {
        Self::scaled_identity(4, 4, 0.5, 0.25, 0.5, 1.0, 0.1)
            .expect("default parameters are valid")
    }

    /// Default starting point: a fixed non-stationary `theta` and `omega = 0`.
    pub fn default_init(&self) -> (DVector<f64>, DVector<f64>) {
        let pattern = [1.0, -1.0, 0.5, -0.5];
        let theta =
            DVector::from_fn(self.dim_theta(), |i, _| pattern[i % pattern.len()]);
        (theta, DVector::zeros(self.dim_omega()))
    }

    pub fn dim_theta(&self) -> usize {
        self.h.nrows()
    }

    pub fn dim_omega(&self) -> usize {
        self.coupling.ncols()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn coupling_norm(&self) -> f64 {
        self.coupling_norm
    }

    /// Conservative joint smoothness constant
    /// `l = max(||H|| + a, mu) + ||A||`. Every audited inequality is
    /// monotone in `l`, so an upper bound keeps them valid.
    pub fn smoothness(&self) -> f64 {
        (self.h_norm + self.sine_amplitude).max(self.mu) + self.coupling_norm
    }

    /// Condition number `kappa = l / mu`.
    pub fn kappa(&self) -> f64 {
        self.smoothness() / self.mu
    }

    /// Variance bound entering the analysis. Gradient noise is Gaussian with
    /// per-coordinate variance `sigma^2 / M`, so the per-block norm variance
    /// is `d * sigma^2 / M`; the analysis constant must cover the larger
    /// block.
    pub fn assumption_sigma_sq(&self) -> f64 {
        self.dim_theta().max(self.dim_omega()) as f64 * self.sigma * self.sigma
    }

    /// Joint objective value.
    pub fn loss(&self, theta: &DVector<f64>, omega: &DVector<f64>) -> f64 {
        let quad = 0.5 * (theta.transpose() * &self.h * theta)[(0, 0)];
        let sines: f64 = theta.iter().map(|t| t.sin()).sum();
        let coupled = (theta.transpose() * &self.coupling * omega)[(0, 0)];
        quad + self.sine_amplitude * sines + coupled - 0.5 * self.mu * omega.norm_squared()
    }

    pub fn grad_theta(&self, theta: &DVector<f64>, omega: &DVector<f64>) -> DVector<f64> {
        &self.h * theta
            + DVector::from_iterator(
                theta.len(),
                theta.iter().map(|t| self.sine_amplitude * t.cos()),
            )
            + &self.coupling * omega
    }

    pub fn grad_omega(&self, theta: &DVector<f64>, omega: &DVector<f64>) -> DVector<f64> {
        self.coupling.transpose() * theta - self.mu * omega
    }

    /// Inner maximizer `omega*(theta) = A' theta / mu`.
    pub fn omega_star(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.coupling.transpose() * theta / self.mu
    }

    /// Envelope `L*(theta) = max_omega L(theta, omega)`.
    pub fn l_star(&self, theta: &DVector<f64>) -> f64 {
        let quad = 0.5 * (theta.transpose() * &self.h * theta)[(0, 0)];
        let sines: f64 = theta.iter().map(|t| t.sin()).sum();
        let at = self.coupling.transpose() * theta;
        quad + self.sine_amplitude * sines + at.norm_squared() / (2.0 * self.mu)
    }

    /// Envelope gradient `H theta + a cos(theta) + A A' theta / mu`.
    pub fn grad_l_star(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.h * theta
            + DVector::from_iterator(
                theta.len(),
                theta.iter().map(|t| self.sine_amplitude * t.cos()),
            )
            + &self.coupling * (self.coupling.transpose() * theta) / self.mu
    }

    /// Unbiased stochastic gradients: exact gradients plus i.i.d. Gaussian
    /// noise of per-coordinate variance `sigma^2 / M` on each block.
    pub fn stochastic_grads<R: Rng>(
        &self,
        theta: &DVector<f64>,
        omega: &DVector<f64>,
        batch_m: usize,
        rng: &mut R,
    ) -> (DVector<f64>, DVector<f64>) {
        let mut g_theta = self.grad_theta(theta, omega);
        let mut g_omega = self.grad_omega(theta, omega);
        if self.sigma > 0.0 {
            let std = self.sigma / (batch_m as f64).sqrt();
            for v in g_theta.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += std * z;
            }
            for v in g_omega.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += std * z;
            }
        }
        (g_theta, g_omega)
    }
}

/// Result of the envelope-minimum search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinOracle {
    pub value: f64,
    pub argmin: Vec<f64>,
    /// Half-width of the search box `[-b, b]^d`.
    pub box_halfwidth: f64,
    pub grid_points_per_dim: usize,
}

/// `min_theta L*(theta)` by dense grid search over a box followed by exact
/// gradient-descent polish from the best grid points.
pub fn min_l_star(
    problem: &QuadraticCoupledProblem,
    box_halfwidth: f64,
    budget: usize,
) -> MinOracle {
    let d = problem.dim_theta();
    let per_dim = ((budget as f64).powf(1.0 / d as f64).floor() as usize).clamp(3, 101);
    let mut best: Vec<(f64, DVector<f64>)> = Vec::new();
    let mut point = DVector::zeros(d);
    let mut counter = vec![0usize; d];
    loop {
        for (i, &c) in counter.iter().enumerate() {
            point[i] = -box_halfwidth
                + 2.0 * box_halfwidth * c as f64 / (per_dim - 1) as f64;
        }
        let value = problem.l_star(&point);
        if best.len() < 5 {
            best.push((value, point.clone()));
            best.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite loss"));
        } else if value < best[4].0 {
            best[4] = (value, point.clone());
            best.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite loss"));
        }
        // odometer increment
        let mut i = 0;
        loop {
            counter[i] += 1;
            if counter[i] < per_dim {
                break;
            }
            counter[i] = 0;
            i += 1;
            if i == d {
                break;
            }
        }
        if i == d {
            break;
        }
    }

    // polish each candidate with plain gradient descent at step 1/L
    let smooth = problem.smoothness()
        + problem.coupling_norm() * problem.coupling_norm() / problem.mu();
    let step = 1.0 / smooth;
    let mut overall = best[0].clone();
    for (_, start) in best {
        let mut x = start;
        for _ in 0..50_000 {
            let g = problem.grad_l_star(&x);
            if g.norm() < 1e-12 {
                break;
            }
            x -= step * g;
        }
        let v = problem.l_star(&x);
        if v < overall.0 {
            overall = (v, x);
        }
    }
    MinOracle {
        value: overall.0,
        argmin: overall.1.iter().cloned().collect(),
        box_halfwidth,
        grid_points_per_dim: per_dim,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn omega_star_solves_the_inner_problem() {
        // A = I (2x2), mu = 2, theta = (4, 2) -> omega* = (2, 1)
        let p = QuadraticCoupledProblem::scaled_identity(2, 2, 0.0, 0.0, 1.0, 2.0, 0.0).unwrap();
        let theta = DVector::from_vec(vec![4.0, 2.0]);
        let w = p.omega_star(&theta);
        assert!((w[0] - 2.0).abs() < 1e-15);
        assert!((w[1] - 1.0).abs() < 1e-15);
        // gradient in omega vanishes there
        assert!(p.grad_omega(&theta, &w).norm() < 1e-15);
    }

    #[test]
    fn envelope_gradient_closed_form() {
        // H = 0, a = 0, A = I, mu = 2: grad L* = A A' theta / mu = theta / 2
        let p = QuadraticCoupledProblem::scaled_identity(2, 2, 0.0, 0.0, 1.0, 2.0, 0.0).unwrap();
        let theta = DVector::from_vec(vec![4.0, 2.0]);
        let g = p.grad_l_star(&theta);
        assert!((g[0] - 2.0).abs() < 1e-15);
        assert!((g[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn origin_is_stationary_without_sine() {
        let p = QuadraticCoupledProblem::scaled_identity(3, 3, 0.5, 0.0, 0.5, 1.0, 0.0).unwrap();
        let theta = DVector::zeros(3);
        assert_eq!(p.l_star(&theta), 0.0);
        assert_eq!(p.grad_l_star(&theta).norm(), 0.0);
    }

    #[test]
    fn envelope_equals_loss_at_omega_star() {
        let p = QuadraticCoupledProblem::default_problem();
        let theta = DVector::from_vec(vec![0.3, -1.1, 0.8, 0.2]);
        let w = p.omega_star(&theta);
        assert!((p.l_star(&theta) - p.loss(&theta, &w)).abs() < 1e-12);
        // and dominates the loss elsewhere
        let w_other = DVector::from_vec(vec![0.5, 0.5, -0.5, 0.0]);
        assert!(p.l_star(&theta) >= p.loss(&theta, &w_other));
    }

    #[test]
    fn envelope_gradient_matches_partial_gradient_at_omega_star() {
        let p = QuadraticCoupledProblem::default_problem();
        let theta = DVector::from_vec(vec![1.3, -0.4, 0.1, 2.0]);
        let w = p.omega_star(&theta);
        let diff = (p.grad_l_star(&theta) - p.grad_theta(&theta, &w)).norm();
        assert!(diff < 1e-12, "diff = {diff}");
    }

    #[test]
    fn envelope_gradient_matches_finite_differences() {
        let p = QuadraticCoupledProblem::default_problem();
        let theta = DVector::from_vec(vec![0.7, -0.2, 1.5, -1.0]);
        let g = p.grad_l_star(&theta);
        let h = 1e-6;
        for i in 0..4 {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (p.l_star(&plus) - p.l_star(&minus)) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(1.0);
            assert!(rel < 1e-8, "coord {i}: analytic {} vs fd {fd}", g[i]);
        }
    }

    #[test]
    fn stochastic_grads_are_exact_at_zero_sigma() {
        let p = QuadraticCoupledProblem::scaled_identity(2, 2, 0.5, 0.25, 0.5, 1.0, 0.0).unwrap();
        let theta = DVector::from_vec(vec![0.4, -0.6]);
        let omega = DVector::from_vec(vec![0.2, 0.1]);
        let mut rng = stream(1, Purpose::Test, 0);
        let (gt, gw) = p.stochastic_grads(&theta, &omega, 1, &mut rng);
        assert_eq!((gt - p.grad_theta(&theta, &omega)).norm(), 0.0);
        assert_eq!((gw - p.grad_omega(&theta, &omega)).norm(), 0.0);
    }

    #[test]
    fn stochastic_grads_are_unbiased_with_correct_variance() {
        let p = QuadraticCoupledProblem::default_problem();
        let theta = DVector::from_vec(vec![0.4, -0.6, 1.0, 0.0]);
        let omega = DVector::from_vec(vec![0.2, 0.1, -0.3, 0.5]);
        let exact = p.grad_theta(&theta, &omega);
        let m = 4usize;
        let n = 10_000;
        let mut mean = DVector::zeros(4);
        let mut sq = DVector::zeros(4);
        for i in 0..n {
            let mut rng = stream(5, Purpose::Test, i as u64);
            let (gt, _) = p.stochastic_grads(&theta, &omega, m, &mut rng);
            mean += &gt;
            sq += gt.map(|v| v * v);
        }
        mean /= n as f64;
        sq /= n as f64;
        let sigma_per_coord = p.sigma() / (m as f64).sqrt();
        let tol = 4.0 * sigma_per_coord / (n as f64).sqrt();
        for i in 0..4 {
            assert!(
                (mean[i] - exact[i]).abs() < tol,
                "coord {i}: mean {} vs exact {}",
                mean[i],
                exact[i]
            );
            let var = sq[i] - mean[i] * mean[i];
            let expected = sigma_per_coord * sigma_per_coord;
            assert!(
                (var - expected).abs() < 0.1 * expected,
                "coord {i}: var {var} vs {expected}"
            );
        }
    }

    #[test]
    fn smoothness_constant_is_conservative() {
        let p = QuadraticCoupledProblem::default_problem();
        // l = max(0.5 + 0.25, 1.0) + 0.5 = 1.5
        assert!((p.smoothness() - 1.5).abs() < 1e-12);
        assert!((p.kappa() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn omega_star_is_lipschitz_with_coupling_norm_over_mu() {
        let p = QuadraticCoupledProblem::default_problem();
        let bound = p.coupling_norm() / p.mu();
        assert!(bound <= p.kappa());
        let mut rng = stream(2, Purpose::Test, 0);
        for _ in 0..1000 {
            let t1 = DVector::from_fn(4, |_, _| rng.gen_range(-3.0..3.0));
            let t2 = DVector::from_fn(4, |_, _| rng.gen_range(-3.0..3.0));
            let lhs = (p.omega_star(&t1) - p.omega_star(&t2)).norm();
            let rhs = bound * (&t1 - &t2).norm();
            assert!(lhs <= rhs + 1e-12);
        }
        // equality along the top singular direction (A is a scaled identity)
        let t1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let t2 = DVector::zeros(4);
        let lhs = (p.omega_star(&t1) - p.omega_star(&t2)).norm();
        assert!((lhs - bound * 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_oracle_finds_the_envelope_minimum() {
        let p = QuadraticCoupledProblem::default_problem();
        // L*(theta) = 0.375 ||theta||^2 + 0.25 sum sin(theta_i) separates per
        // coordinate; the scalar minimizer solves 0.75 t + 0.25 cos t = 0
        let oracle = min_l_star(&p, 2.0, 200_000);
        let g = p.grad_l_star(&DVector::from_vec(oracle.argmin.clone()));
        assert!(g.norm() < 1e-9, "gradient at argmin: {}", g.norm());
        let per_coord = oracle.argmin[0];
        assert!(
            (0.75 * per_coord + 0.25 * per_coord.cos()).abs() < 1e-9,
            "scalar stationarity: {per_coord}"
        );
        for c in &oracle.argmin {
            assert!((c - per_coord).abs() < 1e-8);
        }
    }
}
