//! Optimal Dirichlet control of quasi-static elasto-plasticity with von Mises
//! yield condition, regularized by a smoothed Yosida approximation.
//!
//! The state is discretized with P1 displacements and P0 stresses on a
//! structured triangulation of `(0,4) × (0,1)` and implicit Euler in time.
//! Reduced gradients are obtained from a backward adjoint sweep and are used
//! by a gradient method with Armijo backtracking.

pub mod adjoint;
pub mod config;
pub mod control;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod mesh;
pub mod optim;
pub mod plasticity;
pub mod problem;
pub mod sparse;
pub mod state;
pub mod tensor;
pub mod vtk;

pub use error::{Error, Result};
pub use problem::{Problem, ProblemParams};
