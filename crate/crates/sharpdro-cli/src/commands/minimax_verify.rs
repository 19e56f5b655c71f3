//! `minimax-verify`: audit the convergence guarantees on the analytic
//! testbed and emit a delimited report.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sharpdro::minimax::{
    check_descent, check_envelope_gradient_identity, check_gradient_bound,
    check_omega_star_lipschitz, check_rate_bound, min_l_star, run_sgda_sam, validate_rates,
    QuadraticCoupledProblem, RateParams, Trajectory,
};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use crate::output::write_text;
use crate::CliError;

use super::{ensure_dir, runtime};

fn check_row(out: &mut String, name: &str, pass: bool, lhs: f64, rhs: f64, detail: &str) {
    let _ = writeln!(
        out,
        "{name},{},{lhs},{rhs},{detail}",
        if pass { "pass" } else { "FAIL" }
    );
}

pub fn run(
    cfg: &ExperimentConfig,
    out: &Path,
    force: bool,
    threads: usize,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let problem = cfg.minimax_problem()?;
    let rates = cfg.rate_params();
    let mm = &cfg.minimax;

    // constraint gate
    let rate_check = validate_rates(&problem, &rates);
    if !rate_check.passed() && !force {
        let mut msg = String::from(
            "step sizes violate the convergence guarantee's constraints \
             (pass --force to run anyway):",
        );
        for v in &rate_check.violations {
            let _ = write!(msg, "\n  - {v}");
        }
        return Err(CliError::Usage(msg));
    }

    let mut manifest = RunManifest::begin("minimax-verify", cfg.content_hash(), mm.seed, threads);
    let mut checks = String::from("check,pass,lhs,rhs,detail\n");
    let mut all_pass = true;

    // (a) envelope gradient identity at random points
    {
        let worst = check_envelope_gradient_identity(&problem, 100, mm.seed);
        let pass = worst <= 1e-12;
        all_pass &= pass;
        check_row(
            &mut checks,
            "envelope_gradient_identity",
            pass,
            worst,
            1e-12,
            "max |grad L* - grad_theta L(theta, omega*)| over 100 points",
        );
    }

    // (b) inner-maximizer Lipschitz bound
    {
        let report = check_omega_star_lipschitz(&problem, mm.lipschitz_pairs, mm.seed);
        all_pass &= report.holds_at_enforced;
        check_row(
            &mut checks,
            "omega_star_lipschitz",
            report.holds_at_enforced,
            report.max_ratio,
            report.enforced_constant,
            &format!(
                "max ratio over {} pairs; analysis constant l/(2mu) also holds: {}",
                report.pairs, report.holds_at_half_kappa
            ),
        );
    }

    // (c) perturbed-gradient second-moment bound, Monte Carlo
    {
        let (theta0, _) = problem.default_init();
        let omega = problem.omega_star(&theta0).map(|v| v * 0.5);
        let report = check_gradient_bound(
            &problem,
            &rates,
            &theta0,
            &omega,
            mm.grad_bound_samples,
            mm.seed,
        );
        all_pass &= report.pass;
        check_row(
            &mut checks,
            "perturbed_gradient_bound",
            report.pass,
            report.lhs_monte_carlo,
            report.rhs_bound,
            &format!("{} samples", report.samples),
        );
    }

    // (d) per-step descent on a deterministic run
    let deterministic = QuadraticCoupledProblem::scaled_identity(
        mm.dim_theta,
        mm.dim_omega,
        mm.h_diag,
        mm.sine_amplitude,
        mm.coupling,
        mm.mu,
        0.0,
    )
    .map_err(|e| runtime(format!("deterministic problem: {e}")))?;
    let descent_rates = RateParams::new(
        rates.eta_theta,
        rates.eta_omega,
        rates.rho,
        rates.batch_m,
        mm.descent_steps,
    );
    let audit_traj = run_sgda_sam(&deterministic, &descent_rates, None, mm.seed)
        .map_err(|e| runtime(format!("descent audit run: {e}")))?;
    {
        let report = check_descent(&audit_traj, &deterministic, &descent_rates)
            .map_err(|e| runtime(format!("descent audit: {e}")))?;
        let pass = report.passed();
        all_pass &= pass;
        check_row(
            &mut checks,
            "per_step_descent",
            pass,
            report.violations.len() as f64,
            0.0,
            &format!(
                "{} steps audited, min margin {:.3e}",
                report.steps_checked, report.min_margin
            ),
        );
    }

    // trajectory report rows come from the deterministic audit run, where a
    // per-step violation flag is meaningful
    {
        let mut rows = String::from("iteration,loss,loss_star,grad_star_sq,potential,violations\n");
        let report = check_descent(&audit_traj, &deterministic, &descent_rates)
            .map_err(|e| runtime(format!("descent audit: {e}")))?;
        let mut violated_at = vec![false; audit_traj.points.len()];
        for v in &report.violations {
            violated_at[v.step] = true;
        }
        for (t, p) in audit_traj.points.iter().enumerate() {
            let _ = writeln!(
                rows,
                "{t},{},{},{},{},{}",
                p.loss,
                p.loss_star,
                p.grad_star_sq,
                p.potential,
                u8::from(violated_at[t])
            );
        }
        write_text(&out.join("trajectory.csv"), &rows)?;
    }

    // (e) rate bound over a seed ensemble
    {
        let trajectories: Vec<Result<Trajectory, CliError>> = (0..mm.seeds)
            .into_par_iter()
            .map(|i| {
                run_sgda_sam(&problem, &rates, None, mm.seed.wrapping_add(i as u64))
                    .map_err(|e| runtime(format!("ensemble run {i}: {e}")))
            })
            .collect();
        let trajectories: Vec<Trajectory> =
            trajectories.into_iter().collect::<Result<_, _>>()?;
        let (theta0, _) = problem.default_init();
        let box_halfwidth = trajectories
            .iter()
            .map(Trajectory::max_theta_inf_norm)
            .fold(2.0_f64.max(2.0 * theta0.amax()), f64::max)
            * 1.25;
        let oracle = min_l_star(&problem, box_halfwidth, mm.grid_budget);
        let report = check_rate_bound(&trajectories, &problem, &rates, &oracle)
            .map_err(|e| runtime(format!("rate bound: {e}")))?;
        all_pass &= report.pass;
        check_row(
            &mut checks,
            "rate_bound",
            report.pass,
            report.lhs_mean,
            report.rhs_bound,
            &format!(
                "{} seeds, T = {}, min L* = {} over box half-width {}",
                report.ensemble_size, report.horizon, oracle.value, oracle.box_halfwidth
            ),
        );
    }

    // step-size constraint outcome is part of the report as well
    check_row(
        &mut checks,
        "rate_constraints",
        rate_check.passed(),
        rate_check.violations.len() as f64,
        0.0,
        &if rate_check.passed() {
            format!("delta L* = {}", rate_check.delta_l_star)
        } else {
            rate_check.violations.join("; ")
        },
    );

    write_text(&out.join("checks.csv"), &checks)?;
    write_text(&out.join("config.resolved.toml"), &cfg.to_canonical_toml())?;
    manifest.finish();
    manifest.save(out)?;

    print!("{checks}");
    if !all_pass {
        return Err(CliError::Runtime(
            "one or more convergence checks failed".to_string(),
            Some(out.join("manifest.json")),
        ));
    }
    Ok(())
}
