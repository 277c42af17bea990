//! Plain ASCII mesh format.
//!
//! ```text
//! dim n_nodes n_elements n_bfaces
//! x [y [z]]                      n_nodes lines
//! n1 .. n(dim+1)                 n_elements lines, 1-based node indices
//! n1 .. n(dim) element           n_bfaces lines, 1-based node and element indices
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Coordinates are
//! written with the shortest representation that parses back to the same
//! value, so a write/read cycle reproduces the mesh exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::SimplexMesh;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn write_mesh<T: Real>(mesh: &SimplexMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh_to(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_mesh_to<T: Real, W: Write>(mesh: &SimplexMesh<T>, w: &mut W) -> Result<()> {
    let dim = mesh.dim();
    writeln!(
        w,
        "{} {} {} {}",
        dim,
        mesh.node_count(),
        mesh.element_count(),
        mesh.boundary_faces().len()
    )?;
    for p in mesh.nodes() {
        let coords: Vec<String> = p[..dim].iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", coords.join(" "))?;
    }
    for conn in mesh.elements() {
        let ids: Vec<String> = conn.iter().map(|n| (n + 1).to_string()).collect();
        writeln!(w, "{}", ids.join(" "))?;
    }
    for f in mesh.boundary_faces() {
        let ids: Vec<String> = f.nodes.iter().map(|n| (n + 1).to_string()).collect();
        writeln!(w, "{} {}", ids.join(" "), f.element + 1)?;
    }
    Ok(())
}

pub fn read_mesh<T: Real>(path: impl AsRef<Path>) -> Result<SimplexMesh<T>> {
    let path = path.as_ref();
    read_mesh_from(File::open(path)?, path)
}

/// Parses a mesh from any reader; `origin` is only used in error messages.
pub fn read_mesh_from<T: Real, R: Read>(reader: R, origin: impl AsRef<Path>) -> Result<SimplexMesh<T>> {
    let origin = origin.as_ref().to_path_buf();
    let mut lines = Lines::new(BufReader::new(reader), origin.clone());

    let (hline, header) = lines.next_record()?;
    let header: Vec<usize> = parse_fields(&header, hline, &origin, "header")?;
    if header.len() != 4 {
        return Err(parse_err(&origin, hline, "header must hold `dim n_nodes n_elements n_bfaces`"));
    }
    let [dim, n_nodes, n_elems, n_faces] = [header[0], header[1], header[2], header[3]];
    if !(1..=3).contains(&dim) {
        return Err(parse_err(&origin, hline, format!("dimension {dim} is not 1, 2 or 3")));
    }

    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, rec) = lines.next_record()?;
        let xs: Vec<T> = parse_fields(&rec, ln, &origin, "coordinate")?;
        if xs.len() != dim {
            return Err(parse_err(&origin, ln, format!("expected {dim} coordinates, found {}", xs.len())));
        }
        let mut p = [T::zero(); 3];
        p[..dim].copy_from_slice(&xs);
        nodes.push(p);
    }

    let mut elements = Vec::with_capacity(n_elems * (dim + 1));
    let mut element_lines = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        let (ln, rec) = lines.next_record()?;
        let ids = parse_indices(&rec, ln, &origin, dim + 1, n_nodes, "node")?;
        elements.extend(ids);
        element_lines.push(ln);
    }

    let mut faces = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (ln, rec) = lines.next_record()?;
        let fields: Vec<usize> = parse_fields(&rec, ln, &origin, "index")?;
        if fields.len() != dim + 1 {
            return Err(parse_err(
                &origin,
                ln,
                format!("boundary face needs {dim} node indices and an element index"),
            ));
        }
        let node_ids = check_range(&fields[..dim], n_nodes, ln, &origin, "node")?;
        let elem = check_range(&fields[dim..], n_elems, ln, &origin, "element")?[0];
        faces.push((ln, node_ids, elem));
    }
    if let Some((ln, _)) = lines.next_record_opt()? {
        return Err(parse_err(&origin, ln, "unexpected data after the last boundary face"));
    }

    let mesh = SimplexMesh::new(dim, nodes, elements).map_err(|e| match e {
        Error::DegenerateElement { element, .. } => {
            parse_err(&origin, element_lines[element], format!("element {} is degenerate", element + 1))
        }
        Error::NonConforming(msg) => parse_err(&origin, hline, msg),
        other => other,
    })?;

    let mut expected: HashMap<Vec<usize>, usize> = mesh
        .boundary_faces()
        .iter()
        .map(|f| {
            let mut k = f.nodes.clone();
            k.sort_unstable();
            (k, f.element)
        })
        .collect();
    for (ln, mut ids, elem) in faces {
        ids.sort_unstable();
        match expected.remove(&ids) {
            Some(owner) if owner == elem => {}
            Some(owner) => {
                return Err(parse_err(
                    &origin,
                    ln,
                    format!("boundary face belongs to element {}, not {}", owner + 1, elem + 1),
                ))
            }
            None => return Err(parse_err(&origin, ln, "not a boundary face of the mesh")),
        }
    }
    if !expected.is_empty() {
        return Err(parse_err(
            &origin,
            hline,
            format!("{} boundary faces of the mesh are missing from the face list", expected.len()),
        ));
    }
    Ok(mesh)
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
    origin: PathBuf,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R, origin: PathBuf) -> Self {
        Self {
            inner: r.lines(),
            line: 0,
            origin,
        }
    }

    fn next_record_opt(&mut self) -> Result<Option<(usize, String)>> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(Some((self.line, t.to_string())));
        }
        Ok(None)
    }

    fn next_record(&mut self) -> Result<(usize, String)> {
        self.next_record_opt()?
            .ok_or_else(|| parse_err(&self.origin, self.line + 1, "unexpected end of file"))
    }
}

fn parse_err(origin: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        message: msg.into(),
    }
}

fn parse_fields<V: std::str::FromStr>(rec: &str, ln: usize, origin: &Path, what: &str) -> Result<Vec<V>> {
    rec.split_whitespace()
        .map(|tok| {
            tok.parse::<V>()
                .map_err(|_| parse_err(origin, ln, format!("invalid {what} `{tok}`")))
        })
        .collect()
}

fn check_range(ids: &[usize], count: usize, ln: usize, origin: &Path, what: &str) -> Result<Vec<usize>> {
    ids.iter()
        .map(|&i| {
            if i == 0 || i > count {
                Err(parse_err(origin, ln, format!("{what} index {i} out of range 1..={count}")))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

fn parse_indices(
    rec: &str,
    ln: usize,
    origin: &Path,
    expected: usize,
    count: usize,
    what: &str,
) -> Result<Vec<usize>> {
    let raw: Vec<usize> = parse_fields(rec, ln, origin, "index")?;
    if raw.len() != expected {
        return Err(parse_err(origin, ln, format!("expected {expected} indices, found {}", raw.len())));
    }
    check_range(&raw, count, ln, origin, what)
}
