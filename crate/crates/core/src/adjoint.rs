//! Objective, backward adjoint sweep and the reduced gradient.
//!
//! The adjoint state consists of a P0 field `φ` and P1 fields `w` vanishing on
//! `Γ_D`. Backwards from the terminal pair `(w_T, φ_T)` every step solves
//!
//! ```text
//! (I + Δt(C + εB)A'_k) φ^k = φ^{k+1} + Δt C∇ˢw^k,
//! (C∇ˢw^k, ∇ˢζ) = (C A'_k φ^k, ∇ˢζ)   for ζ vanishing on Γ_D,
//! ```
//!
//! with `A'_k` the derivative of `A_δ` at the forward state of node `k`.
//! The sweep starts from `φ^{n_t+1} := φ_T`, so the terminal datum also passes
//! through the step at `t_{n_t}`; this makes the scheme the exact transpose of
//! the forward implicit Euler linearization.

use nalgebra::Matrix3;

use crate::control::{integrate_psi, ControlTrajectory};
use crate::error::{Error, Result};
use crate::fem::{self, P0TensorField, P1VectorField};
use crate::problem::Problem;
use crate::sparse::norm;
use crate::state::{solve_state, yield_jacobians, StateTrajectory};
use crate::tensor::SymTensor2;

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveParams {
    pub alpha: f64,
    pub sigma_d: P0TensorField,
}

impl ObjectiveParams {
    pub fn new(alpha: f64, sigma_d: P0TensorField) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Parameter(format!("Tikhonov weight must be positive, got {alpha}")));
        }
        Ok(ObjectiveParams { alpha, sigma_d })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue {
    /// `½‖σ(T) − σ_d‖²`.
    pub tracking: f64,
    /// `(α/2)‖ℓ̇‖²`.
    pub tikhonov: f64,
}

impl ObjectiveValue {
    pub fn total(&self) -> f64 {
        self.tracking + self.tikhonov
    }
}

pub fn objective(problem: &Problem, control: &ControlTrajectory, traj: &StateTrajectory) -> Result<ObjectiveValue> {
    control.grid.check_same(&traj.grid)?;
    let sigma_t = traj.sigma.last().expect("trajectory has a final node");
    let diff: Vec<SymTensor2> = sigma_t
        .iter()
        .zip(&problem.objective.sigma_d)
        .map(|(a, b)| *a - *b)
        .collect();
    Ok(ObjectiveValue {
        tracking: 0.5 * fem::p0_inner(&problem.mesh, &diff, &diff),
        tikhonov: 0.5 * problem.objective.alpha * problem.control.h10_inner(control, control)?,
    })
}

#[derive(Clone, Debug)]
pub struct AdjointTrajectory {
    pub phi: Vec<P0TensorField>,
    pub w: Vec<P1VectorField>,
    pub w_t: P1VectorField,
    pub phi_t: P0TensorField,
}

/// Terminal pair: `w_T` solves the `Γ_D`-clamped elasticity problem with load
/// `C(σ_T − σ_d)`, and `φ_T = C(σ_T − σ_d − ∇ˢw_T)`.
pub fn solve_terminal(problem: &Problem, sigma_t: &[SymTensor2]) -> Result<(P1VectorField, P0TensorField)> {
    let c = &problem.elasticity;
    let diff: Vec<SymTensor2> = sigma_t
        .iter()
        .zip(&problem.objective.sigma_d)
        .map(|(a, b)| *a - *b)
        .collect();
    let load_tensor: Vec<SymTensor2> = diff.iter().map(|d| c.apply(d)).collect();
    let w_t = problem
        .k_dirichlet
        .solve(&fem::load_from_tensor(&problem.mesh, &load_tensor))?;
    let phi_t = diff
        .iter()
        .zip(fem::strain(&problem.mesh, &w_t))
        .map(|(d, e)| c.apply(&(*d - e)))
        .collect();
    Ok((w_t, phi_t))
}

/// One backward step: given `φ^{k+1}` and the forward state at node `k`,
/// return `(φ^k, w^k)`.
pub fn adjoint_step(
    problem: &Problem,
    phi_next: &[SymTensor2],
    sigma_k: &[SymTensor2],
    z_k: &[SymTensor2],
    dt: f64,
) -> Result<(P0TensorField, P1VectorField)> {
    let jac = yield_jacobians(problem, sigma_k, z_k);
    if jac.iter().all(Option::is_none) {
        return Ok((phi_next.to_vec(), vec![0.0; problem.n_dofs()]));
    }
    let cm = problem.elasticity.mandel();
    let s = cm + Matrix3::identity() * problem.hardening_weight();
    let mut n_inv = Vec::with_capacity(jac.len());
    let mut tangents = Vec::with_capacity(jac.len());
    let mut rhs = Vec::with_capacity(jac.len());
    for (cell, (j, phi)) in jac.iter().zip(phi_next).enumerate() {
        match j {
            None => {
                n_inv.push(None);
                tangents.push(cm);
                rhs.push(SymTensor2::ZERO);
            }
            Some(m) => {
                let block = Matrix3::identity() + s * m * dt;
                let inv = block.try_inverse().ok_or_else(|| Error::SingularCell {
                    cell,
                    detail: format!("adjoint block I + dt (C + eps B) A' singular, dt = {dt}"),
                })?;
                let cjn = cm * m * inv;
                let t = cm - cjn * cm * dt;
                tangents.push(0.5 * (t + t.transpose()));
                rhs.push(phi.transform(&cjn));
                n_inv.push(Some(inv));
            }
        }
    }
    let k = fem::assemble_stiffness(&problem.mesh, &problem.pattern, |t| tangents[t]);
    let w = k
        .factor(&problem.gamma_d)?
        .solve(&fem::load_from_tensor(&problem.mesh, &rhs))?;
    let eps_w = fem::strain(&problem.mesh, &w);
    let phi = phi_next
        .iter()
        .zip(&eps_w)
        .zip(&n_inv)
        .map(|((p, e), inv)| {
            let updated = *p + problem.elasticity.apply(e) * dt;
            inv.map_or(updated, |m| updated.transform(&m))
        })
        .collect();
    Ok((phi, w))
}

pub fn solve_adjoint(problem: &Problem, traj: &StateTrajectory) -> Result<AdjointTrajectory> {
    let n = traj.grid.n_t;
    let dt = traj.grid.dt();
    let (w_t, phi_t) = solve_terminal(problem, &traj.sigma[n])?;
    let mut phi: Vec<P0TensorField> = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n + 1);
    for k in (0..=n).rev() {
        let next = phi.last().unwrap_or(&phi_t);
        let (phi_k, w_k) =
            adjoint_step(problem, next, &traj.sigma[k], &traj.z[k], dt).map_err(|e| e.at_step(k))?;
        phi.push(phi_k);
        w.push(w_k);
    }
    phi.reverse();
    w.reverse();
    Ok(AdjointTrajectory { phi, w, w_t, phi_t })
}

/// Right-hand side tensor `C(A'φ − ∇ˢw)` of the `q` equation at one node.
fn q_source(problem: &Problem, jac: &[Option<Matrix3<f64>>], phi: &[SymTensor2], w: &[f64]) -> Vec<SymTensor2> {
    let c = &problem.elasticity;
    jac.iter()
        .zip(phi)
        .zip(fem::strain(&problem.mesh, w))
        .map(|((j, p), e)| {
            let jp = j.map_or(SymTensor2::ZERO, |m| p.transform(&m));
            c.apply(&(jp - e))
        })
        .collect()
}

/// `q^k` solving `(C∇ˢq, ∇ˢζ) = (C(A'_kφ^k − ∇ˢw^k), ∇ˢζ)` for ζ clamped on `Λ_D`.
pub fn compute_q(problem: &Problem, traj: &StateTrajectory, adj: &AdjointTrajectory) -> Result<Vec<P1VectorField>> {
    (0..traj.grid.n_nodes())
        .map(|k| {
            let jac = yield_jacobians(problem, &traj.sigma[k], &traj.z[k]);
            let src = q_source(problem, &jac, &adj.phi[k], &adj.w[k]);
            problem
                .control
                .solve_clamped(&fem::load_from_tensor(&problem.mesh, &src))
                .map_err(|e| e.at_step(k))
        })
        .collect()
}

/// Relative residuals of the discrete adjoint and `q` equations.
#[derive(Clone, Copy, Debug, Default)]
pub struct AdjointResiduals {
    pub terminal: f64,
    pub w_galerkin: f64,
    pub phi_update: f64,
    pub q_galerkin: f64,
}

pub fn adjoint_residuals(
    problem: &Problem,
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
    q: &[P1VectorField],
) -> AdjointResiduals {
    let mesh = &problem.mesh;
    let c = &problem.elasticity;
    let dt = traj.grid.dt();
    let n = traj.grid.n_t;
    let eps_b = problem.hardening_weight();
    let relative = |lhs: &[SymTensor2], rhs: &[SymTensor2], mask: &[bool]| {
        let a = fem::load_from_tensor(mesh, lhs);
        let b = fem::load_from_tensor(mesh, rhs);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..a.len() {
            if !mask[i] {
                num += (a[i] - b[i]).powi(2);
                den += b[i].powi(2);
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    };
    let c_strain = |w: &[f64]| -> Vec<SymTensor2> { fem::strain(mesh, w).iter().map(|e| c.apply(e)).collect() };

    let diff: Vec<SymTensor2> = traj.sigma[n]
        .iter()
        .zip(&problem.objective.sigma_d)
        .map(|(a, b)| c.apply(&(*a - *b)))
        .collect();
    let mut out = AdjointResiduals {
        terminal: relative(&c_strain(&adj.w_t), &diff, &problem.gamma_d),
        ..Default::default()
    };
    for k in 0..=n {
        let jac = yield_jacobians(problem, &traj.sigma[k], &traj.z[k]);
        let cjphi: Vec<SymTensor2> = jac
            .iter()
            .zip(&adj.phi[k])
            .map(|(j, p)| j.map_or(SymTensor2::ZERO, |m| c.apply(&p.transform(&m))))
            .collect();
        if cjphi.iter().any(|t| t.frob_norm() > 0.0) || adj.w[k].iter().any(|&x| x != 0.0) {
            out.w_galerkin = out.w_galerkin.max(relative(&c_strain(&adj.w[k]), &cjphi, &problem.gamma_d));
        }
        let src = q_source(problem, &jac, &adj.phi[k], &adj.w[k]);
        if src.iter().any(|t| t.frob_norm() > 0.0) {
            out.q_galerkin = out
                .q_galerkin
                .max(relative(&c_strain(&q[k]), &src, problem.control.lambda_d_dofs()));
        }
        {
            let next = if k < n { &adj.phi[k + 1] } else { &adj.phi_t };
            let eps_w = c_strain(&adj.w[k]);
            let mut num: f64 = 0.0;
            let mut den: f64 = 0.0;
            for cell in 0..mesh.n_triangles() {
                let phi = adj.phi[k][cell];
                let jphi = jac[cell].map_or(SymTensor2::ZERO, |m| phi.transform(&m));
                let lhs = phi + (c.apply(&jphi) + jphi * eps_b) * dt;
                let rhs = next[cell] + eps_w[cell] * dt;
                num = num.max((lhs - rhs).frob_norm());
                den = den.max(rhs.frob_norm());
            }
            out.phi_update = out.phi_update.max(if den > 0.0 { num / den } else { num });
        }
    }
    out
}

/// One evaluation of the reduced objective with its gradient.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: ObjectiveValue,
    pub gradient: ControlTrajectory,
    pub state: StateTrajectory,
}

/// Riesz representative `ψ + αθ` of the reduced derivative in `H¹₀(X_c)`.
pub fn reduced_gradient(problem: &Problem, control: &ControlTrajectory) -> Result<Evaluation> {
    let state = solve_state(problem, control)?;
    let objective = objective(problem, control, &state)?;
    let adj = solve_adjoint(problem, &state)?;
    let q = compute_q(problem, &state, &adj)?;
    let psi = integrate_psi(&state.grid, &q, problem.params.psi_quadrature)?;
    let alpha = problem.objective.alpha;
    let theta = psi
        .iter()
        .zip(&control.theta)
        .map(|(p, t)| fem::axpy(p, alpha, t))
        .collect();
    Ok(Evaluation {
        objective,
        gradient: ControlTrajectory {
            grid: control.grid,
            theta,
        },
        state,
    })
}

/// Reduced objective only.
pub fn evaluate_objective(problem: &Problem, control: &ControlTrajectory) -> Result<ObjectiveValue> {
    let state = solve_state(problem, control)?;
    objective(problem, control, &state)
}

/// `F'(ℓ)h = (ġ, ḣ)` for the gradient `g`.
pub fn directional_derivative(problem: &Problem, g: &ControlTrajectory, h: &ControlTrajectory) -> Result<f64> {
    problem.control.h10_inner(g, h)
}

/// Euclidean norm of all nodal values, used for scaling checks.
pub fn trajectory_norm(traj: &[P1VectorField]) -> f64 {
    traj.iter().map(|v| norm(v).powi(2)).sum::<f64>().sqrt()
}
