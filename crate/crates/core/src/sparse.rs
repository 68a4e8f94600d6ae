//! Symmetric sparse matrices on the P1 displacement space and their
//! constrained Cholesky solves.
//!
//! Matrices are stored with the full symmetric pattern in compressed columns.
//! Dirichlet dofs are removed by symmetric elimination: the factored matrix
//! keeps the free block and replaces constrained rows and columns by the
//! identity, so one symbolic analysis serves every constraint set.

use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Sparsity of the nodal coupling graph, with per-triangle scatter tables.
pub struct FemPattern {
    n_dofs: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// `scatter[t][6 * r + c]` is the value slot of local dofs `(r, c)` of triangle `t`.
    scatter: Vec<[usize; 36]>,
    symbolic: OnceLock<std::result::Result<SymbolicLlt<usize>, String>>,
}

impl std::fmt::Debug for FemPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemPattern")
            .field("n_dofs", &self.n_dofs)
            .field("nnz", &self.row_idx.len())
            .finish()
    }
}

impl FemPattern {
    pub fn new(mesh: &Mesh) -> Arc<Self> {
        let n_nodes = mesh.n_nodes();
        let mut neighbours: Vec<Vec<usize>> = (0..n_nodes).map(|n| vec![n]).collect();
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    neighbours[a].push(b);
                }
            }
        }
        for list in &mut neighbours {
            list.sort_unstable();
            list.dedup();
        }
        let n_dofs = 2 * n_nodes;
        let mut col_ptr = Vec::with_capacity(n_dofs + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for list in &neighbours {
            for _ in 0..2 {
                for &m in list {
                    row_idx.push(2 * m);
                    row_idx.push(2 * m + 1);
                }
                col_ptr.push(row_idx.len());
            }
        }
        let mut pattern = FemPattern {
            n_dofs,
            col_ptr,
            row_idx,
            scatter: Vec::with_capacity(mesh.n_triangles()),
            symbolic: OnceLock::new(),
        };
        for tri in &mesh.triangles {
            let dofs = local_dofs(tri);
            let mut table = [0usize; 36];
            for r in 0..6 {
                for c in 0..6 {
                    table[6 * r + c] = pattern.slot(dofs[r], dofs[c]).expect("triangle dofs couple");
                }
            }
            pattern.scatter.push(table);
        }
        Arc::new(pattern)
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Value slot of entry `(row, col)`, if it is in the pattern.
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let (start, end) = (self.col_ptr[col], self.col_ptr[col + 1]);
        self.row_idx[start..end]
            .binary_search(&row)
            .ok()
            .map(|k| start + k)
    }

    pub(crate) fn scatter(&self, triangle: usize) -> &[usize; 36] {
        &self.scatter[triangle]
    }

    fn symbolic(&self) -> Result<&SymbolicLlt<usize>> {
        let stored = self.symbolic.get_or_init(|| {
            let structure = SymbolicSparseColMat::new_checked(
                self.n_dofs,
                self.n_dofs,
                self.col_ptr.clone(),
                None,
                self.row_idx.clone(),
            );
            SymbolicLlt::try_new(structure.as_ref(), Side::Lower).map_err(|e| format!("{e:?}"))
        });
        stored.as_ref().map_err(|e| Error::LinearSolve(format!("symbolic analysis failed: {e}")))
    }
}

/// Global dof numbers `[2a, 2a+1, 2b, 2b+1, 2c, 2c+1]` of a triangle.
pub(crate) fn local_dofs(tri: &[usize; 3]) -> [usize; 6] {
    [
        2 * tri[0],
        2 * tri[0] + 1,
        2 * tri[1],
        2 * tri[1] + 1,
        2 * tri[2],
        2 * tri[2] + 1,
    ]
}

/// Symmetric matrix on the pattern of a mesh, without constraints applied.
#[derive(Clone, Debug)]
pub struct SparseSpd {
    pattern: Arc<FemPattern>,
    values: Vec<f64>,
}

impl SparseSpd {
    pub fn zeros(pattern: Arc<FemPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseSpd { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<FemPattern> {
        &self.pattern
    }

    pub fn n_dofs(&self) -> usize {
        self.pattern.n_dofs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.slot(row, col).map_or(0.0, |k| self.values[k])
    }

    /// `y = K x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_dofs()];
        self.matvec_into(&self.values, x, &mut y);
        y
    }

    fn matvec_into(&self, values: &[f64], x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for c in 0..p.n_dofs {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                y[p.row_idx[k]] += values[k] * xc;
            }
        }
    }

    pub fn quad_form(&self, a: &[f64], b: &[f64]) -> f64 {
        self.matvec(b).iter().zip(a).map(|(x, y)| x * y).sum()
    }

    /// Largest `|K_ij − K_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let mut worst: f64 = 0.0;
        for c in 0..p.n_dofs {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                let r = p.row_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Cholesky factorization of the matrix with the given dofs eliminated.
    pub fn factor(&self, constrained: &[bool]) -> Result<SpdFactor> {
        let p = &self.pattern;
        if constrained.len() != p.n_dofs {
            return Err(Error::Parameter(format!(
                "constraint mask has {} entries for {} dofs",
                constrained.len(),
                p.n_dofs
            )));
        }
        if !constrained.iter().any(|&c| c) {
            return Err(Error::LinearSolve(
                "no constrained dofs: the elasticity operator has rigid body modes".into(),
            ));
        }
        let mut reduced = self.values.clone();
        for c in 0..p.n_dofs {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                let r = p.row_idx[k];
                if constrained[c] || constrained[r] {
                    reduced[k] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
        let symbolic = p.symbolic()?.clone();
        let structure = SymbolicSparseColMat::new_checked(
            p.n_dofs,
            p.n_dofs,
            p.col_ptr.clone(),
            None,
            p.row_idx.clone(),
        );
        let llt = Llt::try_new_with_symbolic(
            symbolic,
            SparseColMatRef::new(structure.as_ref(), &reduced),
            Side::Lower,
        )
        .map_err(|e| Error::LinearSolve(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(SpdFactor {
            matrix: self.clone(),
            reduced,
            constrained: constrained.to_vec(),
            llt,
        })
    }
}

/// Factored constrained system, reused for many right-hand sides.
pub struct SpdFactor {
    matrix: SparseSpd,
    reduced: Vec<f64>,
    constrained: Vec<bool>,
    llt: Llt<usize, f64>,
}

/// Target relative residual of a refined direct solve.
const SOLVE_RTOL: f64 = 1e-12;
/// Residuals above this after refinement are reported as failures.
const SOLVE_FAIL_RTOL: f64 = 1e-8;

impl SpdFactor {
    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn matrix(&self) -> &SparseSpd {
        &self.matrix
    }

    /// Solve with homogeneous values on the constrained dofs.
    pub fn solve(&self, load: &[f64]) -> Result<Vec<f64>> {
        self.solve_lifted(load, None)
    }

    /// Find `u` with `u = g` on constrained dofs and `(K u − load)` zero on the
    /// free dofs. Entries of `load` at constrained dofs are ignored.
    pub fn solve_lifted(&self, load: &[f64], prescribed: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.matrix.n_dofs();
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| if self.constrained[i] { 0.0 } else { load[i] })
            .collect();
        if let Some(g) = prescribed {
            let lift: Vec<f64> = (0..n)
                .map(|i| if self.constrained[i] { g[i] } else { 0.0 })
                .collect();
            let k_lift = self.matrix.matvec(&lift);
            for i in 0..n {
                rhs[i] = if self.constrained[i] { g[i] } else { rhs[i] - k_lift[i] };
            }
        }
        let rhs_norm = norm(&rhs);
        if rhs_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.raw_solve(&rhs);
        let mut residual = self.residual(&rhs, &x);
        let mut rel = norm(&residual) / rhs_norm;
        for _ in 0..3 {
            if rel <= SOLVE_RTOL {
                break;
            }
            let dx = self.raw_solve(&residual);
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let r_new = self.residual(&rhs, &candidate);
            let rel_new = norm(&r_new) / rhs_norm;
            if rel_new >= rel {
                break;
            }
            x = candidate;
            residual = r_new;
            rel = rel_new;
        }
        if !(rel <= SOLVE_FAIL_RTOL) {
            return Err(Error::LinearSolve(format!(
                "relative residual {rel:.3e} after iterative refinement"
            )));
        }
        if rel > SOLVE_RTOL {
            log::debug!("direct solve stagnated at relative residual {rel:.3e}");
        }
        Ok(x)
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    fn residual(&self, rhs: &[f64], x: &[f64]) -> Vec<f64> {
        let mut kx = vec![0.0; x.len()];
        self.matrix.matvec_into(&self.reduced, x, &mut kx);
        rhs.iter().zip(&kx).map(|(b, a)| b - a).collect()
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
