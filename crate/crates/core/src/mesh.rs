//! Structured triangulation of the rectangle `(0,4) × (0,1)` and the two
//! boundary partitions used by the control problem.
//!
//! The Dirichlet part of the state problem, `Γ_D`, consists of the two short
//! sides `x = 0` and `x = 4`. The control operator clamps `Λ_D`, the segments
//! `[1,3] × {0}` and `[1,3] × {1}`.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const LENGTH: f64 = 4.0;
pub const HEIGHT: f64 = 1.0;

/// Coordinate tolerance used when classifying boundary nodes.
const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    GammaD,
    GammaN,
    LambdaD,
    LambdaN,
}

/// Membership of a boundary edge in both partitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryTag {
    pub gamma_d: bool,
    pub lambda_d: bool,
}

impl BoundaryTag {
    pub fn contains(&self, part: Part) -> bool {
        match part {
            Part::GammaD => self.gamma_d,
            Part::GammaN => !self.gamma_d,
            Part::LambdaD => self.lambda_d,
            Part::LambdaN => !self.lambda_d,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Area and constant shape function gradients of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct TriangleGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub geometry: Vec<TriangleGeometry>,
}

impl Mesh {
    /// Uniform `n_x × n_y` grid, every cell cut along its lower-left to
    /// upper-right diagonal. Node `(i, j)` has index `i (n_y + 1) + j`.
    pub fn rectangle(n_x: usize, n_y: usize) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::Parameter(format!(
                "mesh sizes must be positive, got {n_x} x {n_y}"
            )));
        }
        let id = |i: usize, j: usize| i * (n_y + 1) + j;
        let mut nodes = Vec::with_capacity((n_x + 1) * (n_y + 1));
        for i in 0..=n_x {
            for j in 0..=n_y {
                nodes.push([LENGTH * i as f64 / n_x as f64, HEIGHT * j as f64 / n_y as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n_x * n_y);
        for i in 0..n_x {
            for j in 0..n_y {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::from_parts(nodes, triangles)
    }

    /// Build a mesh of the rectangle from raw connectivity. Boundary edges are
    /// the edges owned by a single triangle.
    pub fn from_parts(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut geometry = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::Parameter(format!("triangle {t} references a missing node")));
            }
            let geo = triangle_geometry([nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]]);
            if !(geo.area > 0.0) {
                return Err(Error::Parameter(format!(
                    "triangle {t} is degenerate or clockwise (signed area {})",
                    geo.area
                )));
            }
            geometry.push(geo);
        }

        let mut edge_count: HashMap<[usize; 2], (usize, [usize; 2])> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                edge_count.entry(key).or_insert((0, [a, b])).0 += 1;
            }
        }
        let mut boundary_edges = Vec::new();
        for (key, (count, oriented)) in edge_count {
            match count {
                1 => boundary_edges.push((key, oriented)),
                2 => {}
                _ => {
                    return Err(Error::Parameter(format!(
                        "edge {key:?} is shared by {count} triangles"
                    )))
                }
            }
        }
        boundary_edges.sort_unstable_by_key(|(key, _)| *key);
        let tagged = boundary_edges
            .into_iter()
            .map(|(_, nodes_ab)| {
                let [a, b] = nodes_ab;
                BoundaryEdge {
                    nodes: nodes_ab,
                    tag: BoundaryTag {
                        gamma_d: on_gamma_d(nodes[a]) && on_gamma_d(nodes[b]),
                        lambda_d: on_lambda_d(nodes[a]) && on_lambda_d(nodes[b]),
                    },
                }
            })
            .collect();
        Ok(Mesh {
            nodes,
            triangles,
            boundary_edges: tagged,
            geometry,
        })
    }

    /// Reflection `x ↦ 4 − x`; node indices are kept, triangles are reoriented.
    pub fn mirrored(&self) -> Result<Self> {
        let nodes = self.nodes.iter().map(|&[x, y]| [LENGTH - x, y]).collect();
        let triangles = self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect();
        Self::from_parts(nodes, triangles)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn boundary_length(&self, part: Part) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag.contains(part))
            .map(|e| self.edge_length(e))
            .sum()
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, b] = edge.nodes;
        let (pa, pb) = (self.nodes[a], self.nodes[b]);
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    }

    /// Nodes lying on a closed Dirichlet part, i.e. endpoints of its edges.
    pub fn node_mask(&self, part: Part) -> Vec<bool> {
        let mut mask = vec![false; self.n_nodes()];
        match part {
            Part::GammaD | Part::LambdaD => {
                for e in self.boundary_edges.iter().filter(|e| e.tag.contains(part)) {
                    mask[e.nodes[0]] = true;
                    mask[e.nodes[1]] = true;
                }
            }
            Part::GammaN | Part::LambdaN => {
                let closed = self.node_mask(if part == Part::GammaN {
                    Part::GammaD
                } else {
                    Part::LambdaD
                });
                for e in &self.boundary_edges {
                    for &n in &e.nodes {
                        mask[n] = !closed[n];
                    }
                }
            }
        }
        mask
    }

    /// Both displacement components of every node in `part`.
    pub fn dof_mask(&self, part: Part) -> Vec<bool> {
        self.node_mask(part).iter().flat_map(|&m| [m, m]).collect()
    }
}

fn on_gamma_d(p: [f64; 2]) -> bool {
    p[0].abs() <= GEOM_TOL || (p[0] - LENGTH).abs() <= GEOM_TOL
}

fn on_lambda_d(p: [f64; 2]) -> bool {
    let horizontal = p[1].abs() <= GEOM_TOL || (p[1] - HEIGHT).abs() <= GEOM_TOL;
    horizontal && p[0] >= 1.0 - GEOM_TOL && p[0] <= 3.0 + GEOM_TOL
}

fn triangle_geometry(p: [[f64; 2]; 3]) -> TriangleGeometry {
    let (x, y) = (p.map(|q| q[0]), p.map(|q| q[1]));
    let det = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
    let mut grads = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        grads[a] = [(y[b] - y[c]) / det, (x[c] - x[b]) / det];
    }
    TriangleGeometry {
        area: 0.5 * det,
        grads,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let m = Mesh::rectangle(1, 1).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (4, 2));
        let m = Mesh::rectangle(64, 16).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (1105, 2048));
        assert!((m.total_area() - 4.0).abs() < 1e-12);
        assert!(Mesh::rectangle(0, 3).is_err());
        assert!(Mesh::rectangle(3, 0).is_err());
    }

    #[test]
    fn boundary_partitions() {
        let m = Mesh::rectangle(8, 4).unwrap();
        assert!((m.boundary_length(Part::GammaD) - 2.0).abs() < 1e-12);
        assert!((m.boundary_length(Part::GammaN) - 8.0).abs() < 1e-12);
        assert!((m.boundary_length(Part::LambdaD) - 4.0).abs() < 1e-12);
        assert!((m.boundary_length(Part::LambdaN) - 6.0).abs() < 1e-12);
        assert_eq!(m.boundary_edges.len(), 2 * (8 + 4));

        let gamma = m.node_mask(Part::GammaD);
        let lambda = m.node_mask(Part::LambdaD);
        for (n, p) in m.nodes.iter().enumerate() {
            let corner_outer = (p[0] == 0.0 || p[0] == 4.0) && (p[1] == 0.0 || p[1] == 1.0);
            if corner_outer {
                assert!(gamma[n]);
                assert!(!lambda[n]);
            }
            if (p[0] == 1.0 || p[0] == 3.0) && (p[1] == 0.0 || p[1] == 1.0) {
                assert!(lambda[n]);
            }
            // the two Dirichlet parts are a unit distance apart
            assert!(!(gamma[n] && lambda[n]));
        }
    }

    #[test]
    fn shape_gradients_reproduce_linears() {
        let m = Mesh::rectangle(3, 2).unwrap();
        for (tri, geo) in m.triangles.iter().zip(&m.geometry) {
            let mut gx = [0.0; 2];
            let mut sum = [0.0; 2];
            for a in 0..3 {
                let x = m.nodes[tri[a]][0];
                gx[0] += x * geo.grads[a][0];
                gx[1] += x * geo.grads[a][1];
                sum[0] += geo.grads[a][0];
                sum[1] += geo.grads[a][1];
            }
            assert!((gx[0] - 1.0).abs() < 1e-12 && gx[1].abs() < 1e-12);
            assert!(sum[0].abs() < 1e-12 && sum[1].abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_keeps_geometry() {
        let m = Mesh::rectangle(4, 2).unwrap();
        let r = m.mirrored().unwrap();
        assert!((r.total_area() - 4.0).abs() < 1e-12);
        assert!((r.boundary_length(Part::LambdaD) - 4.0).abs() < 1e-12);
        assert_eq!(r.node_mask(Part::GammaD), m.node_mask(Part::GammaD));
    }

    #[test]
    fn coarse_mesh_has_no_lambda_d() {
        let m = Mesh::rectangle(1, 1).unwrap();
        assert_eq!(m.boundary_length(Part::LambdaD), 0.0);
        assert!(m.node_mask(Part::LambdaD).iter().all(|&b| !b));
    }
}
