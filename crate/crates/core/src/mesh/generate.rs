use super::SimplexMesh;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Kuhn subdivision of the unit cube: one tetrahedron per axis permutation,
/// all sharing the main diagonal (0,0,0)-(1,1,1).
const KUHN_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Structured simplex mesh of an axis-aligned box.
///
/// Segments in 1-D; every grid cell is cut along its (0,0)-(1,1) diagonal into
/// two triangles in 2-D, and into the six Kuhn tetrahedra around the
/// (0,0,0)-(1,1,1) diagonal in 3-D. The same diagonal is used in every cell,
/// so the mesh is conforming and symmetric under swapping any two axes with
/// equal division counts.
pub fn generate_box_mesh<T: Real>(
    lower: &[T],
    upper: &[T],
    divisions: &[usize],
) -> Result<SimplexMesh<T>> {
    let dim = divisions.len();
    if !(1..=3).contains(&dim) || lower.len() != dim || upper.len() != dim {
        return Err(Error::invalid(format!(
            "box corners ({}, {}) and divisions ({}) must share a dimension of 1, 2 or 3",
            lower.len(),
            upper.len(),
            dim
        )));
    }
    for a in 0..dim {
        if divisions[a] == 0 {
            return Err(Error::invalid(format!("division count on axis {a} must be at least 1")));
        }
        if !(upper[a] > lower[a]) || !upper[a].is_finite() || !lower[a].is_finite() {
            return Err(Error::invalid(format!(
                "degenerate box on axis {a}: lower {} upper {}",
                lower[a], upper[a]
            )));
        }
    }

    let mut div = [1usize; 3];
    div[..dim].copy_from_slice(divisions);
    let stride = [1, div[0] + 1, (div[0] + 1) * (div[1] + 1)];
    let extent = |a: usize| if a < dim { div[a] + 1 } else { 1 };

    let mut nodes = Vec::with_capacity(extent(0) * extent(1) * extent(2));
    for k in 0..extent(2) {
        for j in 0..extent(1) {
            for i in 0..extent(0) {
                let idx = [i, j, k];
                let mut p = [T::zero(); 3];
                for a in 0..dim {
                    let t = T::lit(idx[a] as f64) / T::lit(div[a] as f64);
                    p[a] = if idx[a] == div[a] {
                        upper[a]
                    } else {
                        lower[a] + (upper[a] - lower[a]) * t
                    };
                }
                nodes.push(p);
            }
        }
    }

    let cells = |a: usize| if a < dim { div[a] } else { 1 };
    let corner = |base: [usize; 3], offset: [usize; 3]| -> usize {
        (0..3).map(|a| (base[a] + offset[a]) * stride[a]).sum()
    };
    let mut elements = Vec::new();
    for k in 0..cells(2) {
        for j in 0..cells(1) {
            for i in 0..cells(0) {
                let b = [i, j, k];
                match dim {
                    1 => elements.extend([corner(b, [0, 0, 0]), corner(b, [1, 0, 0])]),
                    2 => {
                        let (v00, v10) = (corner(b, [0, 0, 0]), corner(b, [1, 0, 0]));
                        let (v11, v01) = (corner(b, [1, 1, 0]), corner(b, [0, 1, 0]));
                        elements.extend([v00, v10, v11, v00, v11, v01]);
                    }
                    _ => {
                        for perm in KUHN_PERMUTATIONS {
                            let mut off = [0usize; 3];
                            elements.push(corner(b, off));
                            for axis in perm {
                                off[axis] = 1;
                                elements.push(corner(b, off));
                            }
                        }
                    }
                }
            }
        }
    }

    SimplexMesh::new(dim, nodes, elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::compute_geometry;

    #[test]
    fn minimal_square() {
        let m = generate_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[1, 1]).unwrap();
        assert_eq!((m.node_count(), m.element_count(), m.boundary_faces().len()), (4, 2, 4));
    }

    #[test]
    fn bar_of_four_segments() {
        let m = generate_box_mesh(&[0.0f64], &[1.0], &[4]).unwrap();
        assert_eq!((m.node_count(), m.element_count()), (5, 4));
        let g = compute_geometry(&m).unwrap();
        for e in 0..4 {
            assert!((g.volume(e) - 0.25).abs() < 1e-15);
        }
        assert_eq!(m.boundary_faces().len(), 2);
        let normals: Vec<f64> = m.boundary_faces().iter().map(|f| f.normal[0]).collect();
        assert!(normals.contains(&-1.0) && normals.contains(&1.0));
    }

    #[test]
    fn cube_two_by_two() {
        let m = generate_box_mesh(&[0.0f64; 3], &[1.0; 3], &[2, 2, 2]).unwrap();
        assert_eq!((m.node_count(), m.element_count()), (27, 48));
        let g = compute_geometry(&m).unwrap();
        assert!((g.total_volume() - 1.0).abs() < 1e-12);
        // 6 sides x 4 squares x 2 triangles
        assert_eq!(m.boundary_faces().len(), 48);
    }

    #[test]
    fn slab_element_count() {
        let m = generate_box_mesh(&[0.0f64, 0.0, 0.0], &[1.0, 1.0, 0.05], &[20, 20, 1]).unwrap();
        assert_eq!(m.element_count(), 2400);
        let g = compute_geometry(&m).unwrap();
        assert!((g.total_volume() - 0.05).abs() < 1e-10 * 0.05);
    }

    #[test]
    fn rejects_invalid_boxes() {
        assert!(generate_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[0, 2]).is_err());
        assert!(generate_box_mesh(&[0.0, 1.0], &[1.0, 1.0], &[2, 2]).is_err());
        assert!(generate_box_mesh(&[0.0f64], &[1.0, 1.0], &[2, 2]).is_err());
        assert!(generate_box_mesh::<f64>(&[], &[], &[]).is_err());
    }
}
