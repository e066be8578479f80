//! Legacy ASCII VTK output for nodal fields on triangle meshes.

use std::io::{self, Write};

use crate::mesh::Point;

/// Writes an `UNSTRUCTURED_GRID` with one scalar `POINT_DATA` array per entry
/// of `fields`.
pub fn write_vtk<W: Write>(
    mut out: W,
    title: &str,
    points: &[Point],
    triangles: &[[usize; 3]],
    fields: &[(&str, &[f64])],
) -> io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", points.len())?;
    for p in points {
        writeln!(out, "{:.15e} {:.15e} 0", p.x, p.y)?;
    }
    writeln!(out, "CELLS {} {}", triangles.len(), 4 * triangles.len())?;
    for t in triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {}", triangles.len())?;
    for _ in triangles {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", points.len())?;
    for (name, values) in fields {
        if values.len() != points.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("field `{name}` has {} values for {} points", values.len(), points.len()),
            ));
        }
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(out, "{v:.15e}")?;
        }
    }
    Ok(())
}
