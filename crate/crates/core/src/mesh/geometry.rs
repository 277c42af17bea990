use super::SimplexMesh;
use crate::error::{Error, Result};
use crate::scalar::{norm3, sub3, Real};

/// Per-element geometric data for linear simplices.
///
/// Shape-function gradients are constant on each element and stored
/// zero-padded to three components, `dim + 1` entries per element.
#[derive(Debug, Clone)]
pub struct ElementGeometry<T> {
    dim: usize,
    volumes: Vec<T>,
    grads: Vec<[T; 3]>,
    centroids: Vec<[T; 3]>,
    sizes: Vec<T>,
}

impl<T: Real> ElementGeometry<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn element_count(&self) -> usize {
        self.volumes.len()
    }

    pub fn volume(&self, e: usize) -> T {
        self.volumes[e]
    }

    pub fn volumes(&self) -> &[T] {
        &self.volumes
    }

    pub fn total_volume(&self) -> T {
        self.volumes.iter().copied().sum()
    }

    /// Gradients of the `dim + 1` shape functions of element `e`.
    pub fn grads(&self, e: usize) -> &[[T; 3]] {
        let n = self.dim + 1;
        &self.grads[e * n..(e + 1) * n]
    }

    pub fn centroid(&self, e: usize) -> &[T; 3] {
        &self.centroids[e]
    }

    /// Characteristic element size: mean edge length.
    pub fn size(&self, e: usize) -> T {
        self.sizes[e]
    }

    /// Gradient of a nodal field restricted to element `e`.
    pub fn field_gradient(&self, mesh: &SimplexMesh<T>, e: usize, values: &[T]) -> [T; 3] {
        let mut g = [T::zero(); 3];
        for (gn, &n) in self.grads(e).iter().zip(mesh.element(e)) {
            let v = values[n];
            for c in 0..3 {
                g[c] += gn[c] * v;
            }
        }
        g
    }
}

/// Computes volumes, shape-function gradients, centroids and sizes.
///
/// Fails on the first element whose signed measure is not positive.
pub fn compute_geometry<T: Real>(mesh: &SimplexMesh<T>) -> Result<ElementGeometry<T>> {
    let dim = mesh.dim();
    let npe = dim + 1;
    let ne = mesh.element_count();
    let mut volumes = Vec::with_capacity(ne);
    let mut grads = Vec::with_capacity(ne * npe);
    let mut centroids = Vec::with_capacity(ne);
    let mut sizes = Vec::with_capacity(ne);
    let factorial = [1.0, 1.0, 2.0, 6.0][dim];

    for e in 0..ne {
        let pts: Vec<[T; 3]> = mesh.element(e).iter().map(|&n| *mesh.node(n)).collect();
        let jac = jacobian(dim, &pts);
        let det = determinant(dim, &jac);
        if det <= T::zero() {
            return Err(Error::DegenerateElement {
                element: e,
                measure: det.to_f64_lossy(),
            });
        }
        volumes.push(det / T::lit(factorial));

        let inv = inverse(dim, &jac, det);
        let mut g0 = [T::zero(); 3];
        let mut local = Vec::with_capacity(dim);
        for row in inv.iter().take(dim) {
            for c in 0..3 {
                g0[c] -= row[c];
            }
            local.push(*row);
        }
        grads.push(g0);
        grads.extend(local);

        let inv_n = T::one() / T::lit(npe as f64);
        let mut c = [T::zero(); 3];
        for p in &pts {
            for k in 0..3 {
                c[k] += p[k] * inv_n;
            }
        }
        centroids.push(c);
        sizes.push(mean_edge_length(&pts));
    }

    Ok(ElementGeometry {
        dim,
        volumes,
        grads,
        centroids,
        sizes,
    })
}

/// Columns are the edge vectors `x_j - x_0`; entry `[r][c]` is component `r`
/// of edge `c + 1`.
fn jacobian<T: Real>(dim: usize, pts: &[[T; 3]]) -> [[T; 3]; 3] {
    let mut j = [[T::zero(); 3]; 3];
    for c in 0..dim {
        let d = sub3(&pts[c + 1], &pts[0]);
        for r in 0..dim {
            j[r][c] = d[r];
        }
    }
    j
}

fn determinant<T: Real>(dim: usize, j: &[[T; 3]; 3]) -> T {
    match dim {
        1 => j[0][0],
        2 => j[0][0] * j[1][1] - j[0][1] * j[1][0],
        _ => {
            j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
        }
    }
}

/// Inverse of the leading `dim x dim` block; row `i` is the gradient of the
/// `(i + 1)`-th shape function.
fn inverse<T: Real>(dim: usize, j: &[[T; 3]; 3], det: T) -> [[T; 3]; 3] {
    let z = T::zero();
    let mut inv = [[z; 3]; 3];
    match dim {
        1 => inv[0][0] = T::one() / det,
        2 => {
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
        }
        _ => {
            for r in 0..3 {
                for c in 0..3 {
                    // adjugate: inv[r][c] = cofactor(c, r) / det
                    let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                    let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                    inv[r][c] = (j[r1][c1] * j[r2][c2] - j[r1][c2] * j[r2][c1]) / det;
                }
            }
        }
    }
    inv
}

pub(super) fn jacobian_determinant<T: Real>(dim: usize, pts: &[[T; 3]]) -> T {
    determinant(dim, &jacobian(dim, pts))
}

pub(super) fn edge_scale<T: Real>(pts: &[[T; 3]]) -> T {
    let mut m = T::zero();
    for p in &pts[1..] {
        m = m.max(norm3(&sub3(p, &pts[0])));
    }
    m
}

fn mean_edge_length<T: Real>(pts: &[[T; 3]]) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            sum += norm3(&sub3(&pts[a], &pts[b]));
            count += 1;
        }
    }
    sum / T::lit(count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;

    #[test]
    fn reference_triangle() {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let mesh = SimplexMesh::<f64>::new(2, nodes, vec![0, 1, 2]).unwrap();
        let g = compute_geometry(&mesh).unwrap();
        assert_eq!(g.volume(0), 0.5);
        assert_eq!(g.grads(0), &[[-1.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let c = g.centroid(0);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15 && (c[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.size(0) - (2.0 + 2f64.sqrt()) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reference_tetrahedron() {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let mesh = SimplexMesh::<f64>::new(3, nodes, vec![0, 1, 2, 3]).unwrap();
        let g = compute_geometry(&mesh).unwrap();
        assert!((g.volume(0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(g.grads(0)[0], [-1.0, -1.0, -1.0]);
        assert_eq!(g.grads(0)[3], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn affine_slope_reproduced() {
        for (lo, hi, div) in [
            (vec![0.0], vec![2.0], vec![5]),
            (vec![-1.0, 0.0], vec![1.0, 0.5], vec![3, 4]),
            (vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 0.5], vec![2, 3, 2]),
        ] {
            let mesh = generate_box_mesh(&lo, &hi, &div).unwrap();
            let geom = compute_geometry(&mesh).unwrap();
            let slope = [0.3, -1.7, 2.5];
            let u: Vec<f64> = mesh
                .nodes()
                .iter()
                .map(|p| 0.4 + slope.iter().zip(p).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            for e in 0..mesh.element_count() {
                let g = geom.field_gradient(&mesh, e, &u);
                let sum: [f64; 3] = geom.grads(e).iter().fold([0.0; 3], |acc, v| {
                    [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]
                });
                for c in 0..mesh.dim() {
                    assert!((g[c] - slope[c]).abs() < 1e-12);
                    assert!(sum[c].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inverted_element_reported_by_index() {
        let mut mesh = generate_box_mesh(&[0.0, 0.0], &[1.0, 1.0], &[2, 1]).unwrap();
        let n = mesh.nodes_per_element();
        mesh.elements.swap(3 * n - 1, 3 * n - 2);
        match compute_geometry(&mesh) {
            Err(Error::DegenerateElement { element, measure }) => {
                assert_eq!(element, 2);
                assert!(measure < 0.0);
            }
            other => panic!("expected degenerate element error, got {other:?}"),
        }
    }
}
