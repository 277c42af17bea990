//! Linear simplex meshes in one, two and three dimensions.
//!
//! A [`SimplexMesh`] is immutable once built. Construction orients every
//! element to positive measure, extracts the boundary faces with outward unit
//! normals, and precomputes node adjacency plus the sparsity pattern used by
//! the finite-element assemblers.

mod generate;
mod geometry;
mod io;

use std::collections::HashMap;
use std::sync::Arc;

pub use generate::generate_box_mesh;
pub use geometry::{compute_geometry, ElementGeometry};
pub use io::{read_mesh, read_mesh_from, write_mesh, write_mesh_to};

use crate::error::{Error, Result};
use crate::scalar::{norm3, sub3, Real};

/// A face on the domain boundary, owned by exactly one element.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace<T> {
    /// `dim` node indices, in the order they appear in the owning element.
    pub nodes: Vec<usize>,
    pub element: usize,
    /// Local index (within the element) of the node not on this face.
    pub opposite: usize,
    /// Outward unit normal, zero-padded to three components.
    pub normal: [T; 3],
    /// Length / area of the face; 1 for the point faces of a 1-D mesh.
    pub measure: T,
}

/// Compressed-row sparsity pattern of the node-node coupling graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    /// For element `e`, entry `(a, b)` of the local matrix is stored at
    /// `cols` position `element_slots[e * n * n + a * n + b]`, `n = dim + 1`.
    pub element_slots: Vec<usize>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct SimplexMesh<T> {
    dim: usize,
    nodes: Vec<[T; 3]>,
    elements: Vec<usize>,
    boundary_faces: Vec<BoundaryFace<T>>,
    node_elem_ptr: Vec<usize>,
    node_elem: Vec<usize>,
    pattern: Arc<SparsityPattern>,
}

impl<T: Real> SimplexMesh<T> {
    /// Builds a mesh from node coordinates (zero-padded to 3 components) and a
    /// flat connectivity array with `dim + 1` node indices per element.
    ///
    /// Elements with negative signed measure are reoriented by swapping their
    /// last two nodes; zero-measure elements are rejected.
    pub fn new(dim: usize, nodes: Vec<[T; 3]>, mut elements: Vec<usize>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        let npe = dim + 1;
        if elements.is_empty() || !elements.len().is_multiple_of(npe) {
            return Err(Error::invalid(format!(
                "connectivity length {} is not a positive multiple of {npe}",
                elements.len()
            )));
        }
        for (e, conn) in elements.chunks(npe).enumerate() {
            for (a, &n) in conn.iter().enumerate() {
                if n >= nodes.len() {
                    return Err(Error::invalid(format!(
                        "element {e} references node {n}, mesh has {} nodes",
                        nodes.len()
                    )));
                }
                if conn[..a].contains(&n) {
                    return Err(Error::invalid(format!("element {e} repeats node {n}")));
                }
            }
        }

        for (e, conn) in elements.chunks_mut(npe).enumerate() {
            let pts: Vec<[T; 3]> = conn.iter().map(|&n| nodes[n]).collect();
            let det = geometry::jacobian_determinant(dim, &pts);
            let scale = geometry::edge_scale(&pts).powi(dim as i32);
            if det.abs() <= T::epsilon() * T::lit(16.0) * scale {
                return Err(Error::DegenerateElement {
                    element: e,
                    measure: det.to_f64_lossy(),
                });
            }
            if det < T::zero() {
                conn.swap(npe - 2, npe - 1);
            }
        }

        let boundary_faces = extract_boundary(dim, &nodes, &elements)?;
        let (node_elem_ptr, node_elem) = invert_connectivity(nodes.len(), npe, &elements);
        let pattern = Arc::new(build_pattern(nodes.len(), npe, &elements, &node_elem_ptr, &node_elem));

        Ok(Self {
            dim,
            nodes,
            elements,
            boundary_faces,
            node_elem_ptr,
            node_elem,
            pattern,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn nodes(&self) -> &[[T; 3]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &[T; 3] {
        &self.nodes[i]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.elements[e * n..(e + 1) * n]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.elements.chunks(self.dim + 1)
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace<T>] {
        &self.boundary_faces
    }

    /// Elements incident to node `i`, in increasing order.
    pub fn node_elements(&self, i: usize) -> &[usize] {
        &self.node_elem[self.node_elem_ptr[i]..self.node_elem_ptr[i + 1]]
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Nodes that lie on at least one boundary face.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.node_count()];
        for f in &self.boundary_faces {
            for &n in &f.nodes {
                on[n] = true;
            }
        }
        (0..on.len()).filter(|&i| on[i]).collect()
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounds(&self) -> ([T; 3], [T; 3]) {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for p in &self.nodes {
            for c in 0..3 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        (lo, hi)
    }
}

fn face_local_nodes(npe: usize, opposite: usize) -> impl Iterator<Item = usize> {
    (0..npe).filter(move |&a| a != opposite)
}

fn extract_boundary<T: Real>(
    dim: usize,
    nodes: &[[T; 3]],
    elements: &[usize],
) -> Result<Vec<BoundaryFace<T>>> {
    let npe = dim + 1;
    let mut counts: HashMap<Vec<usize>, u32> = HashMap::new();
    for conn in elements.chunks(npe) {
        for opp in 0..npe {
            let mut key: Vec<usize> = face_local_nodes(npe, opp).map(|a| conn[a]).collect();
            key.sort_unstable();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    if let Some((key, c)) = counts.iter().find(|(_, &c)| c > 2) {
        return Err(Error::NonConforming(format!(
            "face {key:?} is shared by {c} elements"
        )));
    }

    let mut faces = Vec::new();
    for (e, conn) in elements.chunks(npe).enumerate() {
        for opp in 0..npe {
            let fnodes: Vec<usize> = face_local_nodes(npe, opp).map(|a| conn[a]).collect();
            let mut key = fnodes.clone();
            key.sort_unstable();
            if counts[&key] != 1 {
                continue;
            }
            let (normal, measure) = face_normal(dim, nodes, &fnodes, &nodes[conn[opp]]);
            faces.push(BoundaryFace {
                nodes: fnodes,
                element: e,
                opposite: opp,
                normal,
                measure,
            });
        }
    }
    Ok(faces)
}

/// Outward unit normal and measure of a face, oriented away from `interior`.
fn face_normal<T: Real>(
    dim: usize,
    nodes: &[[T; 3]],
    face: &[usize],
    interior: &[T; 3],
) -> ([T; 3], T) {
    let z = T::zero();
    let a = nodes[face[0]];
    let (mut n, measure) = match dim {
        1 => ([T::one(), z, z], T::one()),
        2 => {
            let t = sub3(&nodes[face[1]], &a);
            let len = norm3(&t);
            ([t[1] / len, -t[0] / len, z], len)
        }
        _ => {
            let u = sub3(&nodes[face[1]], &a);
            let v = sub3(&nodes[face[2]], &a);
            let c = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            let len = norm3(&c);
            ([c[0] / len, c[1] / len, c[2] / len], len / T::lit(2.0))
        }
    };
    let out = sub3(&a, interior);
    if n[0] * out[0] + n[1] * out[1] + n[2] * out[2] < z {
        n = [-n[0], -n[1], -n[2]];
    }
    (n, measure)
}

fn invert_connectivity(n_nodes: usize, npe: usize, elements: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut ptr = vec![0usize; n_nodes + 1];
    for &n in elements {
        ptr[n + 1] += 1;
    }
    for i in 0..n_nodes {
        ptr[i + 1] += ptr[i];
    }
    let mut fill = ptr.clone();
    let mut out = vec![0usize; elements.len()];
    for (e, conn) in elements.chunks(npe).enumerate() {
        for &n in conn {
            out[fill[n]] = e;
            fill[n] += 1;
        }
    }
    (ptr, out)
}

fn build_pattern(
    n_nodes: usize,
    npe: usize,
    elements: &[usize],
    node_elem_ptr: &[usize],
    node_elem: &[usize],
) -> SparsityPattern {
    let mut row_ptr = Vec::with_capacity(n_nodes + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut row = Vec::new();
    for i in 0..n_nodes {
        row.clear();
        for &e in &node_elem[node_elem_ptr[i]..node_elem_ptr[i + 1]] {
            row.extend_from_slice(&elements[e * npe..(e + 1) * npe]);
        }
        row.sort_unstable();
        row.dedup();
        cols.extend_from_slice(&row);
        row_ptr.push(cols.len());
    }

    let mut element_slots = Vec::with_capacity(elements.len() * npe);
    for conn in elements.chunks(npe) {
        for &r in conn {
            let row = &cols[row_ptr[r]..row_ptr[r + 1]];
            for &c in conn {
                let pos = row.binary_search(&c).expect("pattern covers element couplings");
                element_slots.push(row_ptr[r] + pos);
            }
        }
    }
    SparsityPattern {
        row_ptr,
        cols,
        element_slots,
    }
}
