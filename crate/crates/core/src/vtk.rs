//! Legacy ASCII VTK output of the triangulation with cell and point data.

use std::io::{self, Write};

use crate::mesh::Mesh;

/// VTK cell type of a linear triangle.
const VTK_TRIANGLE: u8 = 5;

/// Write `mesh` with one cell scalar and optionally the nodal displacement.
pub fn write_unstructured<W: Write>(
    mut out: W,
    title: &str,
    mesh: &Mesh,
    cell_scalar: (&str, &[f64]),
    displacement: Option<&[f64]>,
) -> io::Result<()> {
    let (name, values) = cell_scalar;
    if values.len() != mesh.n_triangles() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("{} cell values for {} triangles", values.len(), mesh.n_triangles()),
        ));
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    // the title line must not contain newlines
    writeln!(out, "{}", title.replace('\n', " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_nodes())?;
    for p in &mesh.nodes {
        writeln!(out, "{:e} {:e} 0", p[0], p[1])?;
    }
    writeln!(out, "CELLS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.n_triangles())?;
    for _ in &mesh.triangles {
        writeln!(out, "{VTK_TRIANGLE}")?;
    }
    writeln!(out, "CELL_DATA {}", mesh.n_triangles())?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(out, "{v:e}")?;
    }
    if let Some(u) = displacement {
        writeln!(out, "POINT_DATA {}", mesh.n_nodes())?;
        writeln!(out, "VECTORS displacement double")?;
        for d in u.chunks_exact(2) {
            writeln!(out, "{:e} {:e} 0", d[0], d[1])?;
        }
    }
    out.flush()
}
