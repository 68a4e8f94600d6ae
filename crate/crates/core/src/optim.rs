//! Gradient descent with Armijo backtracking on the reduced objective, and
//! the diagnostics reported per run.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::{evaluate_objective, reduced_gradient, Evaluation};
use crate::control::ControlTrajectory;
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::state::StateTrajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub tol_gradient: f64,
    pub max_iter: usize,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    pub fd_tau: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            tol_gradient: 5e-4,
            max_iter: 100,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            max_backtracks: 40,
            fd_tau: 1e-8,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_gradient > 0.0) {
            return Err(Error::Parameter("tol_gradient must be positive".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Parameter("backtrack_factor must lie in (0, 1)".into()));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::Parameter("armijo_c1 must lie in (0, 1)".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::Parameter("initial_step must be positive".into()));
        }
        if !(self.fd_tau > 0.0) {
            return Err(Error::Parameter("fd_tau must be positive".into()));
        }
        Ok(())
    }
}

/// One row of `iterations.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub tracking_term: f64,
    pub tikhonov_term: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    #[serde(rename = "dist_K")]
    pub dist_k: f64,
    pub wall_time_s: f64,
}

/// `‖g‖` in `H¹₀(X_c)`.
pub fn grad_norm(problem: &Problem, g: &ControlTrajectory) -> Result<f64> {
    Ok(problem.control.h10_inner(g, g)?.max(0.0).sqrt())
}

#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub control: ControlTrajectory,
    pub objective: f64,
    pub backtracks: usize,
}

/// Backtrack `s = s_0 β^j` until `F(ℓ − s g) ≤ F(ℓ) − c₁ s ‖g‖²`.
///
/// Trial points where the state solver fails count as rejected.
pub fn armijo_search(
    mut objective: impl FnMut(&ControlTrajectory) -> Result<f64>,
    control: &ControlTrajectory,
    g: &ControlTrajectory,
    g_norm_sq: f64,
    f_current: f64,
    initial_step: f64,
    cfg: &OptimConfig,
) -> Result<LineSearchOutcome> {
    if !(g_norm_sq > 0.0) {
        return Err(Error::Stationary);
    }
    let mut step = initial_step;
    let mut last_trial = f64::NAN;
    for backtracks in 0..=cfg.max_backtracks {
        let trial_control = control.axpy(-step, g)?;
        match objective(&trial_control) {
            Ok(trial) => {
                if trial <= f_current - cfg.armijo_c1 * step * g_norm_sq {
                    return Ok(LineSearchOutcome {
                        step,
                        control: trial_control,
                        objective: trial,
                        backtracks,
                    });
                }
                last_trial = trial;
            }
            Err(e) => log::warn!("trial step {step:.3e} rejected: {e}"),
        }
        if backtracks < cfg.max_backtracks {
            step *= cfg.backtrack_factor;
        }
    }
    Err(Error::LineSearch {
        backtracks: cfg.max_backtracks,
        step,
        trial: last_trial,
        current: f_current,
    })
}

/// `max_{k, T} (|σ^D|_F − γ)/γ`.
pub fn dist_k(traj: &StateTrajectory, gamma: f64) -> f64 {
    traj.sigma
        .iter()
        .flat_map(|s| s.iter())
        .map(|s| (s.deviator().frob_norm() - gamma) / gamma)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `⟨g, −g⟩` against the forward difference quotient of `F` along `−g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    pub derivative: f64,
    pub quotient: f64,
    /// Relative mismatch; `None` when the quotient vanishes.
    pub err: Option<f64>,
}

impl FdCheck {
    pub fn new(derivative: f64, quotient: f64) -> Self {
        let err = (quotient != 0.0).then(|| ((derivative - quotient) / quotient).abs());
        FdCheck {
            derivative,
            quotient,
            err,
        }
    }
}

pub fn fd_gradient_error(
    problem: &Problem,
    control: &ControlTrajectory,
    g: &ControlTrajectory,
    f_current: f64,
    tau: f64,
) -> Result<FdCheck> {
    let derivative = -problem.control.h10_inner(g, g)?;
    let quotient = (evaluate_objective(problem, &control.axpy(-tau, g)?)?.total() - f_current) / tau;
    Ok(FdCheck::new(derivative, quotient))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed(String),
}

pub struct OptimResult {
    pub control: ControlTrajectory,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Objective, gradient and state at the returned control.
    pub last: Evaluation,
}

/// Steepest descent from `ℓ = 0`. `on_record` sees every record as it is produced.
pub fn gradient_descent(
    problem: &Problem,
    cfg: &OptimConfig,
    mut on_record: impl FnMut(&IterationRecord),
) -> Result<OptimResult> {
    cfg.validate()?;
    let start = Instant::now();
    let gamma = problem.yield_params.gamma;
    let mut control = ControlTrajectory::zeros(problem.grid, problem.n_dofs());
    let mut eval = reduced_gradient(problem, &control)?;
    let mut records = Vec::new();
    let record = |iter: usize, eval: &Evaluation, step: f64| -> Result<IterationRecord> {
        Ok(IterationRecord {
            iter,
            objective: eval.objective.total(),
            tracking_term: eval.objective.tracking,
            tikhonov_term: eval.objective.tikhonov,
            grad_norm: grad_norm(problem, &eval.gradient)?,
            step_size: step,
            dist_k: dist_k(&eval.state, gamma),
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    };
    let first = record(0, &eval, 0.0)?;
    on_record(&first);
    records.push(first);

    let mut step0 = cfg.initial_step;
    let mut full_steps = 0;
    let termination = loop {
        let current = records.last().unwrap();
        if current.grad_norm < cfg.tol_gradient {
            break Termination::Converged;
        }
        if current.iter >= cfg.max_iter {
            break Termination::MaxIterations;
        }
        let g_norm_sq = current.grad_norm * current.grad_norm;
        let f_current = current.objective;
        let outcome = armijo_search(
            |l| evaluate_objective(problem, l).map(|v| v.total()),
            &control,
            &eval.gradient,
            g_norm_sq,
            f_current,
            step0,
            cfg,
        );
        let outcome = match outcome {
            Ok(o) => o,
            Err(e @ Error::LineSearch { .. }) => break Termination::LineSearchFailed(e.to_string()),
            Err(e) => return Err(e),
        };
        control = outcome.control;
        eval = reduced_gradient(problem, &control)?;
        full_steps = if outcome.backtracks == 0 { full_steps + 1 } else { 0 };
        step0 = outcome.step;
        if full_steps >= 2 {
            step0 *= 2.0;
            full_steps = 0;
        }
        let rec = record(current.iter + 1, &eval, outcome.step)?;
        log::info!(
            "iter {:4}  F = {:.6e}  |g| = {:.3e}  step = {:.3e}  dist_K = {:.4}",
            rec.iter,
            rec.objective,
            rec.grad_norm,
            rec.step_size,
            rec.dist_k
        );
        on_record(&rec);
        records.push(rec);
    };
    Ok(OptimResult {
        control,
        records,
        termination,
        last: eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::TimeGrid;

    fn quadratic_surrogate(n: usize) -> (ControlTrajectory, impl Fn(&ControlTrajectory) -> f64) {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let l = ControlTrajectory::from_fn(grid, |k, _| {
            if k == 0 || k == 4 {
                vec![0.0; n]
            } else {
                (0..n).map(|i| (i + k) as f64 * 0.1).collect()
            }
        });
        // plain Euclidean difference quotient norm standing in for the H¹₀ product
        let norm_sq = move |c: &ControlTrajectory| -> f64 {
            (0..4)
                .map(|k| {
                    c.theta[k + 1]
                        .iter()
                        .zip(&c.theta[k])
                        .map(|(a, b)| (a - b).powi(2) * 4.0)
                        .sum::<f64>()
                })
                .sum()
        };
        (l, move |c| 0.5 * norm_sq(c))
    }

    #[test]
    fn stationary_gradient_is_reported() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let zero = ControlTrajectory::zeros(grid, 4);
        let result = armijo_search(|_| Ok(0.0), &zero, &zero, 0.0, 0.0, 1.0, &OptimConfig::default());
        assert!(matches!(result, Err(Error::Stationary)));
    }

    #[test]
    fn full_step_on_quadratic() {
        let (l, f) = quadratic_surrogate(3);
        let f0 = f(&l);
        let g_sq = 2.0 * f0;
        let out = armijo_search(|c| Ok(f(c)), &l, &l, g_sq, f0, 1.0, &OptimConfig::default()).unwrap();
        assert_eq!(out.step, 1.0);
        assert_eq!(out.backtracks, 0);
        assert!(out.objective < f0);
        assert!(out.objective.abs() < 1e-14);
    }

    #[test]
    fn backtracks_from_a_long_step() {
        let (l, f) = quadratic_surrogate(3);
        let f0 = f(&l);
        let out = armijo_search(|c| Ok(f(c)), &l, &l, 2.0 * f0, f0, 16.0, &OptimConfig::default()).unwrap();
        // F(ℓ − sℓ) = (1 − s)² F, Armijo needs (1 − s)² ≤ 1 − 2c₁s
        assert_eq!(out.step, 1.0);
        assert_eq!(out.backtracks, 4);
    }

    #[test]
    fn failure_carries_last_trial() {
        let (l, f) = quadratic_surrogate(2);
        let f0 = f(&l);
        let cfg = OptimConfig {
            max_backtracks: 3,
            ..OptimConfig::default()
        };
        // ascent direction: never accepted
        let up = l.scaled(-1.0);
        match armijo_search(|c| Ok(f(c)), &l, &up, 2.0 * f0, f0, 1.0, &cfg) {
            Err(Error::LineSearch { backtracks, trial, current, .. }) => {
                assert_eq!(backtracks, 3);
                assert!(trial > current);
            }
            other => panic!("unexpected {:?}", other.map(|o| o.step)),
        }
    }

    #[test]
    fn fd_check_of_quadratic_surrogate() {
        let (l, f) = quadratic_surrogate(3);
        let g = l.clone();
        let tau = 1e-6;
        let quotient = (f(&l.axpy(-tau, &g).unwrap()) - f(&l)) / tau;
        let check = FdCheck::new(-2.0 * f(&l), quotient);
        assert!(check.err.unwrap() <= 1e-6);
        assert_eq!(FdCheck::new(1.0, 0.0).err, None);
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        let bad = OptimConfig {
            backtrack_factor: 1.0,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
