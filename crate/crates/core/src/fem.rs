//! P1 displacement fields, P0 tensor fields and the matrices coupling them.
//!
//! A P1 vector field is a flat vector `[u_x(0), u_y(0), u_x(1), ...]`; a P0
//! tensor field holds one [`SymTensor2`] per triangle.

use std::sync::Arc;

use nalgebra::{Matrix3, SMatrix};

use crate::mesh::{Mesh, Part};
use crate::sparse::{FemPattern, SparseSpd};
use crate::tensor::SymTensor2;

pub type P1VectorField = Vec<f64>;
pub type P0TensorField = Vec<SymTensor2>;

/// Symmetric gradient matrix of a triangle in the Mandel basis (3 × 6).
pub fn strain_matrix(grads: &[[f64; 2]; 3]) -> SMatrix<f64, 3, 6> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut b = SMatrix::<f64, 3, 6>::zeros();
    for a in 0..3 {
        let [gx, gy] = grads[a];
        b[(0, 2 * a)] = gx;
        b[(2, 2 * a)] = s * gy;
        b[(1, 2 * a + 1)] = gy;
        b[(2, 2 * a + 1)] = s * gx;
    }
    b
}

/// Cellwise symmetric gradient of a P1 field.
pub fn strain(mesh: &Mesh, u: &[f64]) -> P0TensorField {
    mesh.triangles
        .iter()
        .zip(&mesh.geometry)
        .map(|(tri, geo)| {
            let mut e = SymTensor2::ZERO;
            for a in 0..3 {
                let (ux, uy) = (u[2 * tri[a]], u[2 * tri[a] + 1]);
                let [dx, dy] = geo.grads[a];
                e.xx += ux * dx;
                e.yy += uy * dy;
                e.xy += 0.5 * (ux * dy + uy * dx);
            }
            e
        })
        .collect()
}

/// The covector `ζ ↦ (s, ∇ˢζ)` on P1 test fields.
pub fn load_from_tensor(mesh: &Mesh, s: &[SymTensor2]) -> Vec<f64> {
    let mut f = vec![0.0; mesh.n_dofs()];
    for ((tri, geo), st) in mesh.triangles.iter().zip(&mesh.geometry).zip(s) {
        for a in 0..3 {
            let [dx, dy] = geo.grads[a];
            f[2 * tri[a]] += geo.area * (st.xx * dx + st.xy * dy);
            f[2 * tri[a] + 1] += geo.area * (st.xy * dx + st.yy * dy);
        }
    }
    f
}

/// `(a, b)` in `L²(Ω)` for P0 tensor fields.
pub fn p0_inner(mesh: &Mesh, a: &[SymTensor2], b: &[SymTensor2]) -> f64 {
    mesh.geometry
        .iter()
        .zip(a.iter().zip(b))
        .map(|(g, (x, y))| g.area * x.dot(y))
        .sum()
}

pub fn p0_norm(mesh: &Mesh, a: &[SymTensor2]) -> f64 {
    p0_inner(mesh, a, a).sqrt()
}

/// Nodal interpolation of a vector-valued function.
pub fn interpolate(mesh: &Mesh, f: impl Fn(f64, f64) -> [f64; 2]) -> P1VectorField {
    mesh.nodes.iter().flat_map(|&[x, y]| f(x, y)).collect()
}

/// Stiffness matrix `(D_t ∇ˢφ_i, ∇ˢφ_j)` with a Mandel material matrix per triangle.
pub fn assemble_stiffness(
    mesh: &Mesh,
    pattern: &Arc<FemPattern>,
    material: impl Fn(usize) -> Matrix3<f64>,
) -> SparseSpd {
    let mut k = SparseSpd::zeros(pattern.clone());
    let values = k.values_mut();
    for (t, geo) in mesh.geometry.iter().enumerate() {
        let b = strain_matrix(&geo.grads);
        let ke = b.transpose() * material(t) * b * geo.area;
        let ke = 0.5 * (ke + ke.transpose());
        let scatter = pattern.scatter(t);
        for r in 0..6 {
            for c in 0..6 {
                values[scatter[6 * r + c]] += ke[(r, c)];
            }
        }
    }
    k
}

/// P1 vector mass matrix of `L²(Ω)`.
pub fn assemble_mass(mesh: &Mesh, pattern: &Arc<FemPattern>) -> SparseSpd {
    let mut m = SparseSpd::zeros(pattern.clone());
    let values = m.values_mut();
    for (t, geo) in mesh.geometry.iter().enumerate() {
        let scatter = pattern.scatter(t);
        for a in 0..3 {
            for b in 0..3 {
                let w = geo.area / 12.0 * if a == b { 2.0 } else { 1.0 };
                for d in 0..2 {
                    values[scatter[6 * (2 * a + d) + 2 * b + d]] += w;
                }
            }
        }
    }
    m
}

/// P1 vector mass matrix of `L²` on the boundary edges tagged `part`.
pub fn assemble_boundary_mass(mesh: &Mesh, pattern: &Arc<FemPattern>, part: Part) -> SparseSpd {
    let mut m = SparseSpd::zeros(pattern.clone());
    for edge in mesh.boundary_edges.iter().filter(|e| e.tag.contains(part)) {
        let len = mesh.edge_length(edge);
        for &a in &edge.nodes {
            for &b in &edge.nodes {
                let w = len / 6.0 * if a == b { 2.0 } else { 1.0 };
                for d in 0..2 {
                    let slot = pattern.slot(2 * a + d, 2 * b + d).expect("edge nodes couple");
                    m.values_mut()[slot] += w;
                }
            }
        }
    }
    m
}

/// Elementwise `a + s b`.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::IsotropicElasticity;

    fn setup(n_x: usize, n_y: usize) -> (Mesh, Arc<FemPattern>) {
        let mesh = Mesh::rectangle(n_x, n_y).unwrap();
        let pattern = FemPattern::new(&mesh);
        (mesh, pattern)
    }

    #[test]
    fn strain_of_affine_fields() {
        let (mesh, _) = setup(4, 3);
        let u = interpolate(&mesh, |x, y| [0.3 * x, -0.7 * y]);
        for e in strain(&mesh, &u) {
            assert!((e - SymTensor2::diag(0.3, -0.7)).frob_norm() < 1e-12);
        }
        let rot = interpolate(&mesh, |x, y| [-2.0 * y, 2.0 * x]);
        assert!(strain(&mesh, &rot).iter().all(|e| e.frob_norm() < 1e-12));
        let c = interpolate(&mesh, |_, _| [1.5, -0.5]);
        assert!(strain(&mesh, &c).iter().all(|e| e.frob_norm() < 1e-12));
    }

    #[test]
    fn load_of_identity_is_boundary_flux() {
        let (mesh, _) = setup(4, 2);
        let f = load_from_tensor(&mesh, &vec![SymTensor2::IDENTITY; mesh.n_triangles()]);
        // ∮ ν φ_i ds; interior entries vanish
        let boundary: Vec<bool> = {
            let mut b = vec![false; mesh.n_nodes()];
            for e in &mesh.boundary_edges {
                b[e.nodes[0]] = true;
                b[e.nodes[1]] = true;
            }
            b
        };
        let (hx, hy) = (1.0, 0.5);
        for (n, &[x, y]) in mesh.nodes.iter().enumerate() {
            let (fx, fy) = (f[2 * n], f[2 * n + 1]);
            if !boundary[n] {
                assert!(fx.abs() < 1e-12 && fy.abs() < 1e-12);
                continue;
            }
            let ex = if x == 0.0 { -hy } else if x == 4.0 { hy } else { 0.0 };
            let ey = if y == 0.0 { -hx } else if y == 1.0 { hx } else { 0.0 };
            let corner_y = x == 0.0 || x == 4.0;
            let corner_x = y == 0.0 || y == 1.0;
            let want_x = if corner_x && (x == 0.0 || x == 4.0) { ex / 2.0 } else { ex };
            let want_y = if corner_y && (y == 0.0 || y == 1.0) { ey / 2.0 } else { ey };
            assert!((fx - want_x).abs() < 1e-12, "node {n}: {fx} vs {want_x}");
            assert!((fy - want_y).abs() < 1e-12, "node {n}: {fy} vs {want_y}");
        }
    }

    #[test]
    fn stiffness_action_is_load_of_stress() {
        let (mesh, pattern) = setup(5, 3);
        let c = IsotropicElasticity::steel();
        let k = assemble_stiffness(&mesh, &pattern, |_| c.mandel());
        assert_eq!(k.max_asymmetry(), 0.0);
        let u: Vec<f64> = (0..mesh.n_dofs()).map(|i| ((i * 37) % 11) as f64 * 0.01).collect();
        let sigma: Vec<SymTensor2> = strain(&mesh, &u).iter().map(|e| c.apply(e)).collect();
        let f = load_from_tensor(&mesh, &sigma);
        let ku = k.matvec(&u);
        for (a, b) in ku.iter().zip(&f) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
        let shift = interpolate(&mesh, |_, _| [0.2, -0.4]);
        assert!(k.matvec(&shift).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn mass_integrates_constants() {
        let (mesh, pattern) = setup(8, 4);
        let one_x = interpolate(&mesh, |_, _| [1.0, 0.0]);
        let one_y = interpolate(&mesh, |_, _| [0.0, 1.0]);
        let m = assemble_mass(&mesh, &pattern);
        assert!((m.quad_form(&one_x, &one_x) - 4.0).abs() < 1e-12);
        assert!((m.quad_form(&one_y, &one_y) - 4.0).abs() < 1e-12);
        assert!(m.quad_form(&one_x, &one_y).abs() < 1e-14);
        let ml = assemble_boundary_mass(&mesh, &pattern, Part::LambdaN);
        assert!((ml.quad_form(&one_x, &one_x) - 6.0).abs() < 1e-12);
        let md = assemble_boundary_mass(&mesh, &pattern, Part::GammaD);
        assert!((md.quad_form(&one_y, &one_y) - 2.0).abs() < 1e-12);
        // M integrates x² exactly up to the P1 interpolation error
        let x = interpolate(&mesh, |x, _| [x, 0.0]);
        assert!((m.quad_form(&x, &x) - 64.0 / 3.0).abs() < 0.1);
    }
}
