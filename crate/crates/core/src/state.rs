//! Forward solver for the smoothed state system: implicit Euler in time,
//! Newton in space.
//!
//! Each time step solves, for the displacement `u` and plastic strain `z`,
//!
//! ```text
//! (σ, ∇ˢζ) = 0               for ζ vanishing on Γ_D,  u = u_D on Γ_D,
//! σ = C(∇ˢu − z),
//! z = z_prev + Δt A_δ(σ − εBz)   in every cell.
//! ```
//!
//! The flow rule is solved exactly per cell for given `u`, so Newton runs on
//! the displacement with the condensed tangent.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::control::{ControlTrajectory, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::{self, P0TensorField, P1VectorField};
use crate::plasticity::{a_delta, a_delta_jac, a_delta_jac_matrix, condensed_tangent, local_update, LocalUpdate};
use crate::problem::Problem;
use crate::sparse::norm;
use crate::tensor::SymTensor2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Step halvings tried before a Newton step is declared failed.
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 25,
            max_halvings: 10,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Parameter("Newton tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("Newton needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Converged state of one time step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub u: P1VectorField,
    pub z: P0TensorField,
    pub sigma: P0TensorField,
    pub iterations: usize,
    /// Final equilibrium residual on the free dofs.
    pub residual: f64,
    pub damped: bool,
    pub plastic_cells: usize,
}

#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub grid: TimeGrid,
    pub u: Vec<P1VectorField>,
    pub z: Vec<P0TensorField>,
    pub sigma: Vec<P0TensorField>,
    /// Dirichlet data `u_D^k` used for each step.
    pub u_d: Vec<P1VectorField>,
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

impl StateTrajectory {
    /// Largest `|σ^k − C(∇ˢu^k − z^k)|_F` over all cells.
    pub fn hooke_defect(&self, problem: &Problem, k: usize) -> f64 {
        fem::strain(&problem.mesh, &self.u[k])
            .iter()
            .zip(&self.z[k])
            .zip(&self.sigma[k])
            .map(|((e, z), s)| (*s - problem.elasticity.apply(&(*e - *z))).frob_norm())
            .fold(0.0, f64::max)
    }

    /// Largest cellwise `|σ^D|_F` at time node `k`.
    pub fn max_deviator(&self, k: usize) -> f64 {
        self.sigma[k]
            .iter()
            .map(|s| s.deviator().frob_norm())
            .fold(0.0, f64::max)
    }
}

fn local_updates(problem: &Problem, u: &[f64], z_prev: &[SymTensor2], dt: f64) -> Vec<LocalUpdate> {
    fem::strain(&problem.mesh, u)
        .iter()
        .zip(z_prev)
        .map(|(e, zp)| {
            local_update(
                e,
                zp,
                dt,
                &problem.elasticity,
                &problem.hardening,
                &problem.yield_params,
            )
        })
        .collect()
}

/// `(σ, ∇ˢφ_i)` for every free dof, zero on `Γ_D`.
pub fn equilibrium_residual(problem: &Problem, sigma: &[SymTensor2]) -> Vec<f64> {
    let mut r = fem::load_from_tensor(&problem.mesh, sigma);
    for (ri, &fixed) in r.iter_mut().zip(&problem.gamma_d) {
        if fixed {
            *ri = 0.0;
        }
    }
    r
}

/// One implicit Euler step from `(u_prev, z_prev)` to the Dirichlet datum `u_d`.
pub fn solve_timestep(
    problem: &Problem,
    u_prev: &[f64],
    z_prev: &[SymTensor2],
    u_d: &[f64],
    dt: f64,
) -> Result<StepResult> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    let cfg = &problem.newton;
    // elastic extension of the boundary increment
    let increment: Vec<f64> = u_d.iter().zip(u_prev).map(|(a, b)| a - b).collect();
    let zero = vec![0.0; u_prev.len()];
    let lift = problem.k_dirichlet.solve_lifted(&zero, Some(&increment))?;
    let mut u = fem::axpy(u_prev, 1.0, &lift);
    for (i, &fixed) in problem.gamma_d.iter().enumerate() {
        if fixed {
            u[i] = u_d[i];
        }
    }

    let mut updates = local_updates(problem, &u, z_prev, dt);
    let mut residual = equilibrium_residual(problem, &sigma_of(&updates));
    let mut res_norm = norm(&residual);
    let target = cfg.abs_tol.max(cfg.rel_tol * res_norm);
    let mut damped = false;
    let mut iterations = 0;
    while res_norm > target {
        if iterations == cfg.max_iter {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: res_norm,
                target,
            });
        }
        iterations += 1;
        let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
        let du = if updates.iter().any(|up| up.plastic) {
            let tangent = fem::assemble_stiffness(&problem.mesh, &problem.pattern, |t| updates[t].tangent);
            tangent.factor(&problem.gamma_d)?.solve(&rhs)?
        } else {
            problem.k_dirichlet.solve(&rhs)?
        };

        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let trial = fem::axpy(&u, step, &du);
            let trial_updates = local_updates(problem, &trial, z_prev, dt);
            let trial_residual = equilibrium_residual(problem, &sigma_of(&trial_updates));
            let trial_norm = norm(&trial_residual);
            if trial_norm < res_norm || trial_norm <= target {
                u = trial;
                updates = trial_updates;
                residual = trial_residual;
                res_norm = trial_norm;
                break;
            }
            if halvings == cfg.max_halvings {
                return Err(Error::NewtonDivergence {
                    iterations,
                    residual: res_norm,
                    target,
                });
            }
            if halvings == 0 {
                log::info!("Newton step damped at iteration {iterations} (residual {res_norm:.3e})");
                damped = true;
            }
            halvings += 1;
            step *= 0.5;
        }
    }

    let plastic_cells = updates.iter().filter(|up| up.plastic).count();
    Ok(StepResult {
        u,
        z: updates.iter().map(|up| up.z).collect(),
        sigma: sigma_of(&updates),
        iterations,
        residual: res_norm,
        damped,
        plastic_cells,
    })
}

fn sigma_of(updates: &[LocalUpdate]) -> Vec<SymTensor2> {
    updates.iter().map(|up| up.sigma).collect()
}

/// Forward solve for the Dirichlet data generated by `control`.
pub fn solve_state(problem: &Problem, control: &ControlTrajectory) -> Result<StateTrajectory> {
    problem.grid.check_same(&control.grid)?;
    let u_d = (0..problem.grid.n_nodes())
        .map(|k| problem.control.dirichlet_data(control, k))
        .collect::<Result<Vec<_>>>()?;
    solve_state_with_data(problem, u_d)
}

/// Forward solve for prescribed Dirichlet data `u_D^k`, `k = 0..=n_t`, with
/// `σ(0) = 0`.
pub fn solve_state_with_data(problem: &Problem, u_d: Vec<P1VectorField>) -> Result<StateTrajectory> {
    let grid = problem.grid;
    if u_d.len() != grid.n_nodes() {
        return Err(Error::GridMismatch(grid.n_t, u_d.len().saturating_sub(1)));
    }
    let dt = grid.dt();
    let u0 = u_d[0].clone();
    let z0 = fem::strain(&problem.mesh, &u0);
    let mut traj = StateTrajectory {
        grid,
        u: vec![u0],
        z: vec![z0],
        sigma: vec![vec![SymTensor2::ZERO; problem.mesh.n_triangles()]],
        u_d: Vec::with_capacity(grid.n_nodes()),
        iterations: vec![0],
        residuals: vec![0.0],
    };
    for k in 1..=grid.n_t {
        let step = solve_timestep(problem, &traj.u[k - 1], &traj.z[k - 1], &u_d[k], dt)
            .map_err(|e| e.at_step(k))?;
        log::debug!(
            "step {k}: {} Newton iterations, residual {:.2e}, {} plastic cells",
            step.iterations,
            step.residual,
            step.plastic_cells
        );
        traj.u.push(step.u);
        traj.z.push(step.z);
        traj.sigma.push(step.sigma);
        traj.iterations.push(step.iterations);
        traj.residuals.push(step.residual);
    }
    traj.u_d = u_d;
    Ok(traj)
}

/// Linearization of the full `(u, z)` residual of one time step.
///
/// The residual is `R_u = (C(∇ˢu − z), ∇ˢφ_i)` on free dofs and
/// `R_z = z − z_prev − Δt A_δ(C(∇ˢu − z) − εBz)` per cell.
pub struct NewtonJacobian<'a> {
    problem: &'a Problem,
    dt: f64,
    /// Argument `ξ = σ − εBz` of `A_δ` per cell.
    xi: Vec<SymTensor2>,
}

impl<'a> NewtonJacobian<'a> {
    pub fn new(problem: &'a Problem, u: &[f64], z: &[SymTensor2], dt: f64) -> Self {
        let eps_b = problem.hardening_weight();
        let xi = fem::strain(&problem.mesh, u)
            .iter()
            .zip(z)
            .map(|(e, zc)| problem.elasticity.apply(&(*e - *zc)) - *zc * eps_b)
            .collect();
        NewtonJacobian { problem, dt, xi }
    }

    /// Full residual `(R_u, R_z)` at `(u, z)`.
    pub fn residual(
        problem: &Problem,
        u: &[f64],
        z: &[SymTensor2],
        z_prev: &[SymTensor2],
        dt: f64,
    ) -> (Vec<f64>, Vec<SymTensor2>) {
        let eps_b = problem.hardening_weight();
        let sigma: Vec<SymTensor2> = fem::strain(&problem.mesh, u)
            .iter()
            .zip(z)
            .map(|(e, zc)| problem.elasticity.apply(&(*e - *zc)))
            .collect();
        let r_z = sigma
            .iter()
            .zip(z.iter().zip(z_prev))
            .map(|(s, (zc, zp))| *zc - *zp - a_delta(&(*s - *zc * eps_b), &problem.yield_params) * dt)
            .collect();
        (equilibrium_residual(problem, &sigma), r_z)
    }

    /// Jacobian action on `(du, dz)`.
    pub fn apply(&self, du: &[f64], dz: &[SymTensor2]) -> (Vec<f64>, Vec<SymTensor2>) {
        let p = self.problem;
        let eps_b = p.hardening_weight();
        let de = fem::strain(&p.mesh, du);
        let dsigma: Vec<SymTensor2> = de
            .iter()
            .zip(dz)
            .map(|(e, d)| p.elasticity.apply(&(*e - *d)))
            .collect();
        let dr_z = dsigma
            .iter()
            .zip(dz.iter().zip(&self.xi))
            .map(|(ds, (d, xi))| *d - a_delta_jac(xi, &p.yield_params, &(*ds - *d * eps_b)) * self.dt)
            .collect();
        (equilibrium_residual(p, &dsigma), dr_z)
    }

    /// Schur complement after eliminating the cellwise `z` block.
    pub fn condensed(&self) -> Result<crate::sparse::SparseSpd> {
        let p = self.problem;
        let cm = p.elasticity.mandel();
        let eps_b = p.hardening_weight();
        let mut tangents = Vec::with_capacity(self.xi.len());
        for (cell, xi) in self.xi.iter().enumerate() {
            let t = match a_delta_jac_matrix(xi, &p.yield_params) {
                None => cm,
                Some(jac) => condensed_tangent(&jac, &cm, eps_b, self.dt).ok_or_else(|| Error::SingularCell {
                    cell,
                    detail: format!(
                        "I + dt A'(C + eps B) singular with dt = {}, lambda = {}",
                        self.dt, p.yield_params.lambda_yosida
                    ),
                })?,
            };
            tangents.push(t);
        }
        Ok(fem::assemble_stiffness(&p.mesh, &p.pattern, |t| tangents[t]))
    }
}

/// Discrete form of the a-priori energy estimate
/// `‖σ̇‖²_A + ε‖ż‖²_B ≤ ⟨σ̇, ∇ˢu̇_D⟩` with difference quotients.
#[derive(Clone, Debug)]
pub struct EnergyReport {
    /// `⟨σ̇, ∇ˢu̇_D⟩ − ‖σ̇‖²_A − ε‖ż‖²_B` per interval.
    pub slack: Vec<f64>,
    /// Smallest slack divided by the largest power term.
    pub worst_relative: f64,
    pub worst_interval: usize,
    pub satisfied: bool,
}

pub fn energy_check(problem: &Problem, traj: &StateTrajectory) -> EnergyReport {
    let dt = traj.grid.dt();
    let eps_b = problem.hardening_weight();
    let mesh = &problem.mesh;
    let mut slack = Vec::with_capacity(traj.grid.n_t);
    let mut scale: f64 = 0.0;
    for k in 0..traj.grid.n_t {
        let ds: Vec<SymTensor2> = traj.sigma[k + 1]
            .iter()
            .zip(&traj.sigma[k])
            .map(|(a, b)| (*a - *b) * (1.0 / dt))
            .collect();
        let dz: Vec<SymTensor2> = traj.z[k + 1]
            .iter()
            .zip(&traj.z[k])
            .map(|(a, b)| (*a - *b) * (1.0 / dt))
            .collect();
        let dud: Vec<f64> = traj.u_d[k + 1]
            .iter()
            .zip(&traj.u_d[k])
            .map(|(a, b)| (a - b) / dt)
            .collect();
        let compliance: Vec<SymTensor2> = ds.iter().map(|s| problem.elasticity.apply_inverse(s)).collect();
        let power = fem::p0_inner(mesh, &ds, &fem::strain(mesh, &dud));
        let stored = fem::p0_inner(mesh, &ds, &compliance) + eps_b * fem::p0_inner(mesh, &dz, &dz);
        scale = scale.max(power.abs()).max(stored);
        slack.push(power - stored);
    }
    let (worst_interval, worst) = slack
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, s)| if s < acc.1 { (k, s) } else { acc });
    let worst_relative = if scale > 0.0 { worst / scale } else { 0.0 };
    EnergyReport {
        satisfied: slack.is_empty() || worst_relative >= -10.0 * dt,
        slack,
        worst_relative,
        worst_interval,
    }
}

/// `⟨𝔸σ̇(t_k) − ∇ˢu̇_D(t_k), σ(t_j) − σ(t_k)⟩` with a backward difference at `k ≥ 1`.
pub fn flow_rule_pairing(problem: &Problem, traj: &StateTrajectory, j: usize, k: usize) -> f64 {
    let dt = traj.grid.dt();
    let mesh = &problem.mesh;
    let dud: Vec<f64> = traj.u_d[k]
        .iter()
        .zip(&traj.u_d[k - 1])
        .map(|(a, b)| (a - b) / dt)
        .collect();
    let rate: Vec<SymTensor2> = traj.sigma[k]
        .iter()
        .zip(&traj.sigma[k - 1])
        .zip(fem::strain(mesh, &dud))
        .map(|((a, b), e)| problem.elasticity.apply_inverse(&((*a - *b) * (1.0 / dt))) - e)
        .collect();
    let diff: Vec<SymTensor2> = traj.sigma[j]
        .iter()
        .zip(&traj.sigma[k])
        .map(|(a, b)| *a - *b)
        .collect();
    fem::p0_inner(mesh, &rate, &diff)
}

/// Mandel matrices `A_δ'(σ^k − εBz^k)` for every cell; `None` where it vanishes.
pub fn yield_jacobians(problem: &Problem, sigma: &[SymTensor2], z: &[SymTensor2]) -> Vec<Option<Matrix3<f64>>> {
    let eps_b = problem.hardening_weight();
    sigma
        .iter()
        .zip(z)
        .map(|(s, zc)| a_delta_jac_matrix(&(*s - *zc * eps_b), &problem.yield_params))
        .collect()
}
