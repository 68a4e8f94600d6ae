//! Assembled discrete control problem: mesh, material, time grid and the
//! factorizations shared by the forward, adjoint and control solves.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adjoint::ObjectiveParams;
use crate::control::{PseudoForceOperator, PsiQuadrature, TimeGrid};
use crate::error::{Error, Result};
use crate::fem;
use crate::mesh::{Mesh, Part};
use crate::plasticity::YieldParams;
use crate::sparse::{FemPattern, SparseSpd, SpdFactor};
use crate::state::NewtonConfig;
use crate::tensor::{HardeningTensor, IsotropicElasticity, SymTensor2};

/// Scalar parameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub lambda_yosida: f64,
    pub delta_smooth: f64,
    pub epsilon_hardening: f64,
    pub hardening_scale: f64,
    pub gamma_yield: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub alpha: f64,
    pub t_end: f64,
    pub n_t: usize,
    pub n_x: usize,
    pub n_y: usize,
    /// Factor on the Dirichlet offset `𝔞`.
    pub offset_scale: f64,
    pub psi_quadrature: PsiQuadrature,
    pub newton: NewtonConfig,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            lambda_yosida: 1.0,
            delta_smooth: 1e-8,
            epsilon_hardening: 0.0,
            hardening_scale: 1.0,
            gamma_yield: 0.45,
            youngs_modulus: 210.0,
            poisson_ratio: 0.3,
            alpha: 1e-4,
            t_end: 1.0,
            n_t: 128,
            n_x: 64,
            n_y: 16,
            offset_scale: 1.0,
            psi_quadrature: PsiQuadrature::Nodal,
            newton: NewtonConfig::default(),
        }
    }
}

pub struct Problem {
    pub params: ProblemParams,
    pub mesh: Mesh,
    pub pattern: Arc<FemPattern>,
    pub elasticity: IsotropicElasticity,
    pub hardening: HardeningTensor,
    pub yield_params: YieldParams,
    pub grid: TimeGrid,
    pub newton: NewtonConfig,
    pub objective: ObjectiveParams,
    /// Elasticity matrix without constraints.
    pub stiffness: SparseSpd,
    /// Both displacement components on `Γ_D`.
    pub gamma_d: Vec<bool>,
    /// Elasticity clamped on `Γ_D`.
    pub k_dirichlet: SpdFactor,
    pub control: PseudoForceOperator,
}

impl Problem {
    pub fn new(params: ProblemParams) -> Result<Self> {
        let mesh = Mesh::rectangle(params.n_x, params.n_y)?;
        let elasticity = IsotropicElasticity::from_youngs(params.youngs_modulus, params.poisson_ratio)?;
        let hardening = HardeningTensor::new(params.hardening_scale)?;
        if params.epsilon_hardening > 0.0 && params.hardening_scale == 0.0 {
            return Err(Error::Parameter(
                "hardening tensor must be coercive when epsilon_hardening > 0".into(),
            ));
        }
        let yield_params = YieldParams::new(
            params.gamma_yield,
            params.lambda_yosida,
            params.delta_smooth,
            params.epsilon_hardening,
        )?;
        let grid = TimeGrid::new(params.t_end, params.n_t)?;
        params.newton.validate()?;
        let objective = ObjectiveParams::new(params.alpha, vec![SymTensor2::ZERO; mesh.n_triangles()])?;
        let pattern = FemPattern::new(&mesh);
        let c = elasticity.mandel();
        let stiffness = fem::assemble_stiffness(&mesh, &pattern, |_| c);
        let gamma_d = mesh.dof_mask(Part::GammaD);
        let k_dirichlet = stiffness.factor(&gamma_d)?;
        let control = PseudoForceOperator::new(&mesh, &pattern, &stiffness)?
            .with_offset_scale(params.offset_scale);
        Ok(Problem {
            newton: params.newton,
            params,
            mesh,
            pattern,
            elasticity,
            hardening,
            yield_params,
            grid,
            objective,
            stiffness,
            gamma_d,
            k_dirichlet,
            control,
        })
    }

    /// Replace the tracked stress `σ_d`.
    pub fn set_desired_stress(&mut self, sigma_d: Vec<SymTensor2>) -> Result<()> {
        if sigma_d.len() != self.mesh.n_triangles() {
            return Err(Error::Parameter(format!(
                "desired stress has {} cells, mesh has {}",
                sigma_d.len(),
                self.mesh.n_triangles()
            )));
        }
        self.objective.sigma_d = sigma_d;
        Ok(())
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }

    /// Hardening weight `ε · b` of `ε𝔹 = ε b I`.
    pub fn hardening_weight(&self) -> f64 {
        self.yield_params.epsilon_hardening * self.hardening.scale
    }
}
