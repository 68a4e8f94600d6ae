//! Controls as time-discrete pseudo forces and the map to Dirichlet data.
//!
//! A control is stored as one P1 field `θ^k` per time node. It represents the
//! pseudo force `ℓ = (Eθ, tr θ)`: a volume force in `Ω` together with a
//! boundary traction on `Λ_N`. The pseudo force generates boundary
//! displacements through a linear elasticity solve clamped on `Λ_D`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{self, P1VectorField};
use crate::mesh::{Mesh, Part};
use crate::sparse::{FemPattern, SparseSpd, SpdFactor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_t: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_t: usize) -> Result<Self> {
        if n_t == 0 {
            return Err(Error::Parameter("at least one time step is required".into()));
        }
        if !(t_end > 0.0) {
            return Err(Error::Parameter(format!("final time must be positive, got {t_end}")));
        }
        Ok(TimeGrid { t_end, n_t })
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_t as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t_end * k as f64 / self.n_t as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.n_t + 1
    }

    pub(crate) fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self.n_t != other.n_t || self.t_end != other.t_end {
            return Err(Error::GridMismatch(self.n_t, other.n_t));
        }
        Ok(())
    }
}

/// Piecewise linear control trajectory `t ↦ θ(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlTrajectory {
    pub grid: TimeGrid,
    pub theta: Vec<P1VectorField>,
}

impl ControlTrajectory {
    pub fn zeros(grid: TimeGrid, n_dofs: usize) -> Self {
        ControlTrajectory {
            grid,
            theta: vec![vec![0.0; n_dofs]; grid.n_nodes()],
        }
    }

    /// `f(t_k)` at every node.
    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(usize, f64) -> P1VectorField) -> Self {
        let theta = (0..grid.n_nodes()).map(|k| f(k, grid.t(k))).collect();
        ControlTrajectory { grid, theta }
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: f64, other: &ControlTrajectory) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let theta = self
            .theta
            .iter()
            .zip(&other.theta)
            .map(|(a, b)| fem::axpy(a, s, b))
            .collect();
        Ok(ControlTrajectory {
            grid: self.grid,
            theta,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        ControlTrajectory {
            grid: self.grid,
            theta: self
                .theta
                .iter()
                .map(|v| v.iter().map(|x| s * x).collect())
                .collect(),
        }
    }

    /// Largest violation of the endpoint and `Λ_D` constraints.
    pub fn admissibility_defect(&self, lambda_d_dofs: &[bool]) -> f64 {
        let n = self.grid.n_t;
        let mut worst: f64 = 0.0;
        for (k, v) in self.theta.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                if k == 0 || k == n || lambda_d_dofs[i] {
                    worst = worst.max(x.abs());
                }
            }
        }
        worst
    }
}

/// The operator `G` together with the inner products of the control space.
pub struct PseudoForceOperator {
    nodes: Vec<[f64; 2]>,
    lambda_d: Vec<bool>,
    k_lambda: SpdFactor,
    xc_mass: SparseSpd,
    offset_scale: f64,
}

impl PseudoForceOperator {
    /// `stiffness` is the unconstrained elasticity matrix on `mesh`.
    pub fn new(mesh: &Mesh, pattern: &Arc<FemPattern>, stiffness: &SparseSpd) -> Result<Self> {
        let lambda_d = mesh.dof_mask(Part::LambdaD);
        if !lambda_d.iter().any(|&b| b) {
            return Err(Error::Parameter(
                "the mesh has no edge on the clamped control boundary [1,3] x {0,1}".into(),
            ));
        }
        let k_lambda = stiffness.factor(&lambda_d)?;
        let mut xc_mass = fem::assemble_mass(mesh, pattern);
        let boundary = fem::assemble_boundary_mass(mesh, pattern, Part::LambdaN);
        for (a, b) in xc_mass.values_mut().iter_mut().zip(boundary.values()) {
            *a += b;
        }
        Ok(PseudoForceOperator {
            nodes: mesh.nodes.clone(),
            lambda_d,
            k_lambda,
            xc_mass,
            offset_scale: 1.0,
        })
    }

    /// Multiply the Dirichlet offset by `scale`.
    pub fn with_offset_scale(mut self, scale: f64) -> Self {
        self.offset_scale = scale;
        self
    }

    pub fn offset_scale(&self) -> f64 {
        self.offset_scale
    }

    pub fn lambda_d_dofs(&self) -> &[bool] {
        &self.lambda_d
    }

    /// Covector `ζ ↦ (θ, ζ)_Ω + (θ, ζ)_{Λ_N}`.
    pub fn pseudo_load(&self, theta: &[f64]) -> Vec<f64> {
        self.xc_mass.matvec(theta)
    }

    /// `Gθ`: the elastic displacement driven by the pseudo force, zero on `Λ_D`.
    pub fn apply_g(&self, theta: &[f64]) -> Result<P1VectorField> {
        self.k_lambda.solve(&self.pseudo_load(theta))
    }

    /// Solve the elasticity system clamped on `Λ_D` for a general load.
    pub fn solve_clamped(&self, load: &[f64]) -> Result<P1VectorField> {
        self.k_lambda.solve(load)
    }

    pub fn clamped_factor(&self) -> &SpdFactor {
        &self.k_lambda
    }

    /// Nodal values of `t (x − 2, 0) / 200`.
    pub fn offset_a(&self, t: f64) -> P1VectorField {
        let s = self.offset_scale * t / 200.0;
        self.nodes.iter().flat_map(|&[x, _]| [s * (x - 2.0), 0.0]).collect()
    }

    /// `Gθ^k + 𝔞(t_k)`.
    pub fn dirichlet_data(&self, control: &ControlTrajectory, k: usize) -> Result<P1VectorField> {
        if k > control.grid.n_t {
            return Err(Error::Parameter(format!(
                "time index {k} outside 0..={}",
                control.grid.n_t
            )));
        }
        let mut u = self.offset_a(control.grid.t(k));
        let theta = &control.theta[k];
        if theta.iter().any(|&x| x != 0.0) {
            let g = self.apply_g(theta)?;
            for (a, b) in u.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok(u)
    }

    pub fn xc_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.xc_mass.quad_form(a, b)
    }

    /// `(ℓ̇, ṁ)` in `L²(0,T; X_c)` for piecewise linear trajectories.
    pub fn h10_inner(&self, a: &ControlTrajectory, b: &ControlTrajectory) -> Result<f64> {
        a.grid.check_same(&b.grid)?;
        let dt = a.grid.dt();
        let mut total = 0.0;
        for k in 0..a.grid.n_t {
            let da: Vec<f64> = a.theta[k + 1].iter().zip(&a.theta[k]).map(|(x, y)| x - y).collect();
            let db: Vec<f64> = b.theta[k + 1].iter().zip(&b.theta[k]).map(|(x, y)| x - y).collect();
            total += self.xc_inner(&da, &db) / dt;
        }
        Ok(total)
    }
}

/// Time quadrature behind `ψ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiQuadrature {
    /// Second differences of `ψ` equal `q` at interior nodes. This is the
    /// Riesz representative of `h ↦ Σ_k Δt (q^k, h^k)_{X_c}`, so `q` at the
    /// end nodes does not enter.
    #[default]
    Nodal,
    /// Exact double integral of the piecewise linear interpolant of `q`.
    Interpolant,
}

impl std::str::FromStr for PsiQuadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodal" => Ok(PsiQuadrature::Nodal),
            "interpolant" => Ok(PsiQuadrature::Interpolant),
            other => Err(Error::Config(format!(
                "unknown psi quadrature '{other}' (expected nodal or interpolant)"
            ))),
        }
    }
}

/// `ψ(t) = ∫₀ᵗ∫₀ˢ q − (t/T) ∫₀ᵀ∫₀ˢ q`, discretized by `rule`.
pub fn integrate_psi(grid: &TimeGrid, q: &[P1VectorField], rule: PsiQuadrature) -> Result<Vec<P1VectorField>> {
    if q.len() != grid.n_nodes() {
        return Err(Error::GridMismatch(grid.n_t, q.len().saturating_sub(1)));
    }
    let dt = grid.dt();
    let n = q.first().map_or(0, |v| v.len());
    let mut q1 = vec![0.0; n];
    let mut q2 = vec![vec![0.0; n]; grid.n_nodes()];
    for k in 0..grid.n_t {
        let (qa, qb) = (&q[k], &q[k + 1]);
        let mut next = q2[k].clone();
        match rule {
            PsiQuadrature::Interpolant => {
                for i in 0..n {
                    next[i] += dt * q1[i] + dt * dt * (2.0 * qa[i] + qb[i]) / 6.0;
                    q1[i] += 0.5 * dt * (qa[i] + qb[i]);
                }
            }
            PsiQuadrature::Nodal => {
                // the k = 0 term only adds a ramp, removed below
                for i in 0..n {
                    q1[i] += dt * qa[i];
                    next[i] += dt * q1[i];
                }
            }
        }
        q2[k + 1] = next;
    }
    let last = q2[grid.n_t].clone();
    Ok(q2
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let ramp = k as f64 / grid.n_t as f64;
            v.iter().zip(&last).map(|(a, b)| a - ramp * b).collect()
        })
        .collect())
}
