//! Weak-form solver for `div(k grad u) = 0` with Dirichlet data, and boundary
//! normal-flux recovery.
//!
//! # Boundary flux
//!
//! Fluxes are recovered from the nodal reactions `R = A u` of the assembled
//! system at the prescribed nodes (variationally consistent flux), not from
//! the gradient of a single boundary element. Reactions are spread back onto
//! faces with the face-measure weights used for the adjoint boundary data:
//!
//! ```text
//! f_face = sum_{b in face} R_b / W_b,   W_b = sum_{faces f ∋ b} |f|
//! ```
//!
//! With this pairing the discrete boundary integral `sum f_face |face|`
//! equals `sum R_b`, which vanishes for any conductivity (exact discrete
//! conservation), and the adjoint gradient `V_e grad u . grad u~` is the exact
//! derivative of the discrete cost. Faces whose nodes all lie on one flat side
//! of the measured boundary reproduce constant fluxes exactly; faces touching a
//! corner average the fluxes of the sides meeting there. The single-element
//! evaluation `k_e n . grad u_e` is available as [`element_face_flux`].

use crate::error::{Error, Result};
use crate::mesh::{ElementGeometry, SimplexMesh};
use crate::scalar::{dot3, Real};
use crate::sparse::{conjugate_gradient, CsrMatrix, SolveStats, SolverOptions};

/// Piecewise-constant conductivity, one strictly positive value per element.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField<T> {
    values: Vec<T>,
}

impl<T: Real> ConductivityField<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        for (e, &v) in values.iter().enumerate() {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::NonPositiveConductivity {
                    element: e,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn uniform(n: usize, value: T) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| v * c).collect())
    }
}

/// One value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    pub values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
        }
    }
}

/// One face-averaged normal flux per boundary face (zero on faces outside the
/// measured boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux<T> {
    pub values: Vec<T>,
}

/// The part of the boundary where potentials are prescribed and fluxes are
/// measured. The remainder, if any, is insulated (zero normal flux).
///
/// Every experiment on a genuinely 1-D, 2-D or 3-D domain measures the whole
/// boundary; a thin slab standing in for a 2-D problem leaves its two large
/// faces insulated.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredBoundary<T> {
    active: Vec<bool>,
    prescribed: Vec<bool>,
    nodes: Vec<usize>,
    node_weight: Vec<T>,
}

impl<T: Real> MeasuredBoundary<T> {
    pub fn full(mesh: &SimplexMesh<T>) -> Self {
        Self::from_faces(mesh, vec![true; mesh.boundary_faces().len()])
    }

    /// Insulates every face whose normal is (within 45 degrees) parallel to
    /// `axis`.
    pub fn insulating_axis(mesh: &SimplexMesh<T>, axis: usize) -> Self {
        let half = T::lit(0.5f64.sqrt());
        let active = mesh
            .boundary_faces()
            .iter()
            .map(|f| f.normal[axis].abs() < half)
            .collect();
        Self::from_faces(mesh, active)
    }

    pub fn from_faces(mesh: &SimplexMesh<T>, active: Vec<bool>) -> Self {
        assert_eq!(active.len(), mesh.boundary_faces().len());
        let mut prescribed = vec![false; mesh.node_count()];
        let mut node_weight = vec![T::zero(); mesh.node_count()];
        for (f, face) in mesh.boundary_faces().iter().enumerate() {
            if !active[f] {
                continue;
            }
            for &n in &face.nodes {
                prescribed[n] = true;
                node_weight[n] += face.measure;
            }
        }
        let nodes = (0..prescribed.len()).filter(|&i| prescribed[i]).collect();
        Self {
            active,
            prescribed,
            nodes,
            node_weight,
        }
    }

    pub fn is_active(&self, face: usize) -> bool {
        self.active[face]
    }

    pub fn active_faces(&self) -> &[bool] {
        &self.active
    }

    /// Nodes carrying Dirichlet data, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn is_prescribed(&self, node: usize) -> bool {
        self.prescribed[node]
    }

    pub fn prescribed_mask(&self) -> &[bool] {
        &self.prescribed
    }

    /// Total measure of the measured faces touching `node`.
    pub fn node_weight(&self, node: usize) -> T {
        self.node_weight[node]
    }

    pub fn measure(&self, mesh: &SimplexMesh<T>) -> T {
        mesh.boundary_faces()
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(f, _)| f.measure)
            .sum()
    }
}

/// Prescribed nodal values on a [`MeasuredBoundary`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData<T> {
    nodes: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> DirichletData<T> {
    pub fn new(nodes: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::invalid("Dirichlet node and value counts differ"));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("Dirichlet nodes must be strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite Dirichlet value {v}")));
        }
        Ok(Self { nodes, values })
    }

    /// Samples `f` at every prescribed node of `boundary`.
    pub fn from_fn(
        mesh: &SimplexMesh<T>,
        boundary: &MeasuredBoundary<T>,
        f: impl Fn(&[T; 3]) -> T,
    ) -> Self {
        let nodes = boundary.nodes().to_vec();
        let values = nodes.iter().map(|&n| f(mesh.node(n))).collect();
        Self { nodes, values }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    pub fn covers(&self, boundary: &MeasuredBoundary<T>) -> bool {
        self.nodes == boundary.nodes()
    }
}

fn check_conductivity<T: Real>(mesh: &SimplexMesh<T>, k: &ConductivityField<T>) -> Result<()> {
    if k.len() != mesh.element_count() {
        return Err(Error::invalid(format!(
            "conductivity has {} values for {} elements",
            k.len(),
            mesh.element_count()
        )));
    }
    Ok(())
}

/// `A_ij = sum_e k_e V_e gradN_i . gradN_j`
pub fn assemble_stiffness<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
) -> Result<CsrMatrix<T>> {
    check_conductivity(mesh, k)?;
    let mut a = CsrMatrix::zeros(mesh.pattern().clone());
    let n = mesh.nodes_per_element();
    let mut local = vec![T::zero(); n * n];
    for e in 0..mesh.element_count() {
        let ke = k.values()[e];
        if !(ke > T::zero()) {
            return Err(Error::NonPositiveConductivity {
                element: e,
                value: ke.to_f64_lossy(),
            });
        }
        let w = ke * geom.volume(e);
        let g = geom.grads(e);
        for i in 0..n {
            for j in 0..n {
                local[i * n + j] = w * dot3(&g[i], &g[j]);
            }
        }
        a.add_element(e, &local);
    }
    Ok(a)
}

pub fn solve_forward<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    bc: &DirichletData<T>,
) -> Result<ScalarField<T>> {
    solve_forward_with(mesh, geom, k, bc, &SolverOptions::default()).map(|(u, _)| u)
}

/// Solves the Dirichlet problem by conjugate gradients on the reduced system.
/// Nodes without Dirichlet data (interior, or on insulated faces) are unknowns.
pub fn solve_forward_with<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    bc: &DirichletData<T>,
    opts: &SolverOptions<T>,
) -> Result<(ScalarField<T>, SolveStats)> {
    let a = assemble_stiffness(mesh, geom, k)?;
    solve_dirichlet(mesh, &a, bc, opts)
}

pub(crate) fn solve_dirichlet<T: Real>(
    mesh: &SimplexMesh<T>,
    a: &CsrMatrix<T>,
    bc: &DirichletData<T>,
    opts: &SolverOptions<T>,
) -> Result<(ScalarField<T>, SolveStats)> {
    let n = mesh.node_count();
    if bc.nodes().is_empty() {
        return Err(Error::invalid("Dirichlet data is empty; the problem is singular"));
    }
    if let Some(&bad) = bc.nodes().iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("Dirichlet node {bad} out of range")));
    }
    let mut fixed = vec![false; n];
    let mut x = vec![T::zero(); n];
    for (i, v) in bc.iter() {
        fixed[i] = true;
        x[i] = v;
    }
    let b = vec![T::zero(); n];
    let stats = conjugate_gradient(a, &b, &mut x, Some(&fixed), opts)?;
    Ok((ScalarField { values: x }, stats))
}

/// Nodal reactions `R = A(k) u`, computed element by element.
pub fn reactions<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    u: &ScalarField<T>,
) -> Vec<T> {
    let mut r = vec![T::zero(); mesh.node_count()];
    for e in 0..mesh.element_count() {
        let grad_u = geom.field_gradient(mesh, e, &u.values);
        let w = k.values()[e] * geom.volume(e);
        for (g, &n) in geom.grads(e).iter().zip(mesh.element(e)) {
            r[n] += w * dot3(g, &grad_u);
        }
    }
    r
}

/// Consistent outward normal flux `n . k grad u` per boundary face; see the
/// module documentation for the recovery rule.
pub fn boundary_normal_flux<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    boundary: &MeasuredBoundary<T>,
    u: &ScalarField<T>,
) -> Result<BoundaryFlux<T>> {
    check_conductivity(mesh, k)?;
    if u.values.len() != mesh.node_count() {
        return Err(Error::invalid("field length differs from node count"));
    }
    let r = reactions(mesh, geom, k, u);
    Ok(flux_from_reactions(mesh, boundary, &r))
}

pub(crate) fn flux_from_reactions<T: Real>(
    mesh: &SimplexMesh<T>,
    boundary: &MeasuredBoundary<T>,
    r: &[T],
) -> BoundaryFlux<T> {
    let values = mesh
        .boundary_faces()
        .iter()
        .enumerate()
        .map(|(f, face)| {
            if !boundary.is_active(f) {
                return T::zero();
            }
            face.nodes
                .iter()
                .map(|&b| r[b] / boundary.node_weight(b))
                .sum()
        })
        .collect();
    BoundaryFlux { values }
}

/// `k_e n . grad u_e` evaluated in the element owning each boundary face.
pub fn element_face_flux<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    u: &ScalarField<T>,
) -> BoundaryFlux<T> {
    let values = mesh
        .boundary_faces()
        .iter()
        .map(|f| {
            let g = geom.field_gradient(mesh, f.element, &u.values);
            k.values()[f.element] * dot3(&f.normal, &g)
        })
        .collect();
    BoundaryFlux { values }
}
