//! Legacy ASCII VTK unstructured-grid output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::SimplexMesh;
use crate::scalar::Real;

/// Named scalar arrays to attach to a grid.
#[derive(Debug, Clone, Default)]
pub struct VtkFields<'a, T> {
    pub point: Vec<(&'a str, &'a [T])>,
    pub cell: Vec<(&'a str, &'a [T])>,
}

impl<'a, T> VtkFields<'a, T> {
    pub fn new() -> Self {
        Self {
            point: Vec::new(),
            cell: Vec::new(),
        }
    }

    pub fn point(mut self, name: &'a str, values: &'a [T]) -> Self {
        self.point.push((name, values));
        self
    }

    pub fn cell(mut self, name: &'a str, values: &'a [T]) -> Self {
        self.cell.push((name, values));
        self
    }
}

fn cell_type(dim: usize) -> u8 {
    match dim {
        1 => 3,
        2 => 5,
        _ => 10,
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("VTK array name {name:?} must be a single word")));
    }
    Ok(())
}

pub fn write_vtk_to<T: Real, W: Write>(
    w: &mut W,
    mesh: &SimplexMesh<T>,
    title: &str,
    fields: &VtkFields<'_, T>,
) -> Result<()> {
    for (name, v) in &fields.point {
        check_name(name)?;
        if v.len() != mesh.node_count() {
            return Err(Error::invalid(format!("point array {name} has {} values for {} nodes", v.len(), mesh.node_count())));
        }
    }
    for (name, v) in &fields.cell {
        check_name(name)?;
        if v.len() != mesh.element_count() {
            return Err(Error::invalid(format!(
                "cell array {name} has {} values for {} elements",
                v.len(),
                mesh.element_count()
            )));
        }
    }
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.node_count())?;
    for p in mesh.nodes() {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    let npe = mesh.nodes_per_element();
    writeln!(w, "CELLS {} {}", mesh.element_count(), mesh.element_count() * (npe + 1))?;
    for conn in mesh.elements() {
        write!(w, "{npe}")?;
        for n in conn {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.element_count())?;
    let t = cell_type(mesh.dim());
    for _ in 0..mesh.element_count() {
        writeln!(w, "{t}")?;
    }
    let mut write_arrays = |header: &str, count: usize, arrays: &[(&str, &[T])]| -> std::io::Result<()> {
        if arrays.is_empty() {
            return Ok(());
        }
        writeln!(w, "{header} {count}")?;
        for (name, values) in arrays {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v}")?;
            }
        }
        Ok(())
    };
    write_arrays("POINT_DATA", mesh.node_count(), &fields.point)?;
    write_arrays("CELL_DATA", mesh.element_count(), &fields.cell)?;
    Ok(())
}

pub fn write_vtk<T: Real>(
    path: impl AsRef<Path>,
    mesh: &SimplexMesh<T>,
    title: &str,
    fields: &VtkFields<'_, T>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk_to(&mut w, mesh, title, fields)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;

    #[test]
    fn triangle_grid_layout() {
        let m = generate_box_mesh(&[0.0f64, 0.0], &[1.0, 1.0], &[1, 1]).unwrap();
        let u = [0.0, 1.0, 2.0, 3.0];
        let k = [1.5, 2.5];
        let mut out = Vec::new();
        write_vtk_to(&mut out, &m, "unit square", &VtkFields::new().point("u", &u).cell("k", &k)).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[4], "POINTS 4 double");
        assert!(s.contains("CELLS 2 8\n"));
        assert!(s.contains("CELL_TYPES 2\n5\n5\n"));
        assert!(s.contains("POINT_DATA 4\nSCALARS u double 1\nLOOKUP_TABLE default\n0\n1\n2\n3\n"));
        assert!(s.contains("CELL_DATA 2\nSCALARS k double 1\nLOOKUP_TABLE default\n1.5\n2.5\n"));
    }

    #[test]
    fn length_and_name_checks() {
        let m = generate_box_mesh(&[0.0f64], &[1.0], &[2]).unwrap();
        let mut out = Vec::new();
        let short = [1.0];
        assert!(write_vtk_to(&mut out, &m, "t", &VtkFields::new().point("u", &short)).is_err());
        let ok = [1.0, 2.0, 3.0];
        assert!(write_vtk_to(&mut out, &m, "t", &VtkFields::new().point("bad name", &ok)).is_err());
        out.clear();
        write_vtk_to(&mut out, &m, "t", &VtkFields::new().point("u", &ok)).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("CELL_TYPES 2\n3\n3\n"));
    }
}
