//! Smoothing operators for element fields and projection of element
//! gradients onto coarse piecewise-constant regions.
//!
//! Every smoother starts from the volume-weighted element-to-node average
//! [`elements_to_points`]. The H1 variants solve
//!
//! ```text
//! [M_c + lambda_l K] k = M_c k0                      (Laplacian, lambda_l ~ length^2)
//! [M_c + lambda_pl (M_l - M_c)] k = M_c k0           (pseudo-Laplacian, dimensionless)
//! ```
//!
//! `M_l - M_c` is a weighted graph Laplacian with positive weights, so the
//! pseudo-Laplacian system is symmetric positive definite for every
//! `lambda_pl >= 0`; it stays definite down to `lambda_pl > -1/(dim+1)`, the
//! bound set by the smallest eigenvalue `1/(dim+2)` of `M_l^-1 M_c`.

use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, ConductivityField};
use crate::mesh::{ElementGeometry, SimplexMesh};
use crate::scalar::Real;
use crate::sparse::{conjugate_gradient, CsrMatrix, SolverOptions};

/// Volume-weighted average of incident element values at each node.
pub fn elements_to_points<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    elem_field: &[T],
) -> Result<Vec<T>> {
    if elem_field.len() != mesh.element_count() {
        return Err(Error::invalid("element field length differs from element count"));
    }
    Ok((0..mesh.node_count())
        .map(|i| {
            let (mut num, mut den) = (T::zero(), T::zero());
            for &e in mesh.node_elements(i) {
                num += elem_field[e] * geom.volume(e);
                den += geom.volume(e);
            }
            if den > T::zero() {
                num / den
            } else {
                T::zero()
            }
        })
        .collect())
}

/// Arithmetic mean of the element's nodal values.
pub fn points_to_elements<T: Real>(mesh: &SimplexMesh<T>, nodal: &[T]) -> Result<Vec<T>> {
    if nodal.len() != mesh.node_count() {
        return Err(Error::invalid("nodal field length differs from node count"));
    }
    let inv = T::one() / T::lit(mesh.nodes_per_element() as f64);
    Ok(mesh
        .elements()
        .map(|conn| conn.iter().map(|&n| nodal[n]).sum::<T>() * inv)
        .collect())
}

/// Simple point/element/point averaging, `passes` element-to-node-to-element
/// cycles.
pub fn smooth_spea<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    elem_field: &[T],
    passes: usize,
) -> Result<Vec<T>> {
    if passes == 0 {
        return Err(Error::invalid("SPEA smoothing needs at least one pass"));
    }
    let mut field = elem_field.to_vec();
    for _ in 0..passes {
        let nodal = elements_to_points(mesh, geom, &field)?;
        field = points_to_elements(mesh, &nodal)?;
    }
    Ok(field)
}

#[derive(Debug, Clone)]
pub struct MassMatrices<T> {
    pub consistent: CsrMatrix<T>,
    pub lumped: Vec<T>,
}

/// Consistent P1 mass matrix `V_e (1 + delta_ij) / ((d+1)(d+2))` and its row-sum
/// lumping.
pub fn assemble_mass<T: Real>(mesh: &SimplexMesh<T>, geom: &ElementGeometry<T>) -> MassMatrices<T> {
    let n = mesh.nodes_per_element();
    let d = mesh.dim() as f64;
    let base = T::one() / T::lit((d + 1.0) * (d + 2.0));
    let mut consistent = CsrMatrix::zeros(mesh.pattern().clone());
    let mut local = vec![T::zero(); n * n];
    for e in 0..mesh.element_count() {
        let v = geom.volume(e) * base;
        for i in 0..n {
            for j in 0..n {
                local[i * n + j] = if i == j { v + v } else { v };
            }
        }
        consistent.add_element(e, &local);
    }
    let lumped = consistent.row_sums();
    MassMatrices { consistent, lumped }
}

/// Laplacian H1 smoothing of a nodal field; `lambda_l` has units of length².
pub fn smooth_h1<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    nodal: &[T],
    lambda_l: T,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    if !(lambda_l >= T::zero()) {
        return Err(Error::invalid(format!("lambda_l must be non-negative, got {lambda_l}")));
    }
    check_nodal(mesh, nodal)?;
    let mass = assemble_mass(mesh, geom);
    if lambda_l == T::zero() {
        return Ok(nodal.to_vec());
    }
    let ones = ConductivityField::uniform(mesh.element_count(), T::one())?;
    let lap = assemble_stiffness(mesh, geom, &ones)?;
    let system = mass.consistent.linear_combination(T::one(), &lap, lambda_l);
    let rhs = mass.consistent.apply(nodal);
    let mut x = nodal.to_vec();
    conjugate_gradient(&system, &rhs, &mut x, None, opts)?;
    Ok(x)
}

/// Left-hand side `M_c + lambda (M_l - M_c)` and right-hand side `M_c k0` of
/// the pseudo-Laplacian smoother.
pub fn pseudo_laplacian_system<T: Real>(
    mass: &MassMatrices<T>,
    nodal: &[T],
    lambda_pl: T,
) -> (CsrMatrix<T>, Vec<T>) {
    let mut lhs = mass
        .consistent
        .linear_combination(T::one() - lambda_pl, &mass.consistent, T::zero());
    let lumped: Vec<T> = mass.lumped.iter().map(|&m| lambda_pl * m).collect();
    lhs.add_diagonal(&lumped);
    (lhs, mass.consistent.apply(nodal))
}

/// Dimensionless H1 smoothing, solved directly by conjugate gradients.
pub fn smooth_pseudo_laplacian<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    nodal: &[T],
    lambda_pl: T,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    if !(lambda_pl >= T::zero()) {
        return Err(Error::invalid(format!("lambda_pl must be non-negative, got {lambda_pl}")));
    }
    check_nodal(mesh, nodal)?;
    if lambda_pl == T::zero() {
        return Ok(nodal.to_vec());
    }
    let mass = assemble_mass(mesh, geom);
    let (lhs, rhs) = pseudo_laplacian_system(&mass, nodal, lambda_pl);
    let mut x = nodal.to_vec();
    conjugate_gradient(&lhs, &rhs, &mut x, None, opts)?;
    Ok(x)
}

/// Explicit pseudo-time relaxation of `L u = r`:
/// `C (u^{n+1} - u^n) = dtau (r - L u^n)` with `C = diag(L)`, starting from
/// `initial`. Fails if the residual grows on three consecutive steps.
pub fn relax_solve<T: Real>(
    lhs: &CsrMatrix<T>,
    rhs: &[T],
    initial: &[T],
    dtau: T,
    steps: usize,
) -> Result<Vec<T>> {
    if steps == 0 {
        return Err(Error::invalid("relaxation needs at least one step"));
    }
    if !(dtau > T::zero() && dtau < T::lit(2.0)) {
        return Err(Error::invalid(format!("pseudo-time step {dtau} outside (0, 2)")));
    }
    let n = lhs.rows();
    if rhs.len() != n || initial.len() != n {
        return Err(Error::invalid("relaxation vectors must match the operator size"));
    }
    let diag = lhs.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
        return Err(Error::invalid(format!("non-positive diagonal entry in row {i}")));
    }
    let mut u = initial.to_vec();
    let mut lu = vec![T::zero(); n];
    let mut last = T::infinity();
    let mut growth = 0;
    for step in 0..steps {
        lhs.mul_vec(&u, &mut lu);
        let mut res2 = T::zero();
        for i in 0..n {
            let r = rhs[i] - lu[i];
            res2 += r * r;
            u[i] += dtau * r / diag[i];
        }
        let res = res2.sqrt();
        if res > last {
            growth += 1;
            if growth >= 3 {
                return Err(Error::Diverged {
                    step,
                    residual: res.to_f64_lossy(),
                });
            }
        } else {
            growth = 0;
        }
        last = res;
    }
    Ok(u)
}

pub fn residual_norm<T: Real>(lhs: &CsrMatrix<T>, rhs: &[T], u: &[T]) -> T {
    let lu = lhs.apply(u);
    rhs.iter()
        .zip(&lu)
        .map(|(&r, &l)| (r - l) * (r - l))
        .sum::<T>()
        .sqrt()
}

fn check_nodal<T: Real>(mesh: &SimplexMesh<T>, nodal: &[T]) -> Result<()> {
    if nodal.len() != mesh.node_count() {
        return Err(Error::invalid("nodal field length differs from node count"));
    }
    Ok(())
}

/// Assignment of every element to one of a set of constant-value regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap<T> {
    assignment: Vec<usize>,
    volumes: Vec<T>,
}

impl<T: Real> RegionMap<T> {
    pub fn new(geom: &ElementGeometry<T>, assignment: Vec<usize>, regions: usize) -> Result<Self> {
        if assignment.len() != geom.element_count() {
            return Err(Error::invalid("region assignment length differs from element count"));
        }
        let mut volumes = vec![T::zero(); regions];
        for (e, &r) in assignment.iter().enumerate() {
            if r >= regions {
                return Err(Error::invalid(format!("element {e} assigned to region {r} of {regions}")));
            }
            volumes[r] += geom.volume(e);
        }
        if let Some(r) = volumes.iter().position(|&v| !(v > T::zero())) {
            return Err(Error::EmptyRegion(r));
        }
        Ok(Self { assignment, volumes })
    }

    /// One region covering every element.
    pub fn single(geom: &ElementGeometry<T>) -> Self {
        Self::new(geom, vec![0; geom.element_count()], 1).expect("non-empty mesh")
    }

    /// Cartesian lattice of `counts[a]` cells along each axis of the mesh
    /// bounding box (axes beyond `counts.len()` are not split); elements are
    /// assigned by centroid.
    pub fn lattice(mesh: &SimplexMesh<T>, geom: &ElementGeometry<T>, counts: &[usize]) -> Result<Self> {
        if counts.is_empty() || counts.len() > 3 || counts.contains(&0) {
            return Err(Error::invalid(format!("invalid region lattice {counts:?}")));
        }
        let (lo, hi) = mesh.bounds();
        let mut assignment = Vec::with_capacity(mesh.element_count());
        for e in 0..mesh.element_count() {
            let c = geom.centroid(e);
            let mut idx = 0;
            let mut stride = 1;
            for (a, &n) in counts.iter().enumerate() {
                let t = (c[a] - lo[a]) / (hi[a] - lo[a]);
                let cell = (t * T::lit(n as f64)).floor().to_usize().unwrap_or(0).min(n - 1);
                idx += cell * stride;
                stride *= n;
            }
            assignment.push(idx);
        }
        Self::new(geom, assignment, counts.iter().product())
    }

    pub fn region_count(&self) -> usize {
        self.volumes.len()
    }

    pub fn region_of(&self, e: usize) -> usize {
        self.assignment[e]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn volume(&self, r: usize) -> T {
        self.volumes[r]
    }

    /// Element field taking value `values[r]` on region `r`.
    pub fn expand(&self, values: &[T]) -> Vec<T> {
        self.assignment.iter().map(|&r| values[r]).collect()
    }

    /// Volume average of an element field over each region.
    pub fn average(&self, geom: &ElementGeometry<T>, elem_field: &[T]) -> Vec<T> {
        let mut acc = vec![T::zero(); self.volumes.len()];
        for (e, &r) in self.assignment.iter().enumerate() {
            acc[r] += elem_field[e] * geom.volume(e);
        }
        acc.iter().zip(&self.volumes).map(|(&a, &v)| a / v).collect()
    }
}

/// Region gradient density `sum_{e in r} g_e / V_r`; `g_e` already carries
/// the element volume, so this is the volume average of `g_e / V_e`.
pub fn project_gradient<T: Real>(grad: &[T], regions: &RegionMap<T>) -> Result<Vec<T>> {
    if grad.len() != regions.assignment.len() {
        return Err(Error::invalid("gradient length differs from element count"));
    }
    let mut acc = vec![T::zero(); regions.region_count()];
    for (e, &r) in regions.assignment.iter().enumerate() {
        acc[r] += grad[e];
    }
    Ok(acc
        .iter()
        .zip(&regions.volumes)
        .map(|(&a, &v)| a / v)
        .collect())
}

/// Element gradient whose density is constant per region: `g_e = rho_r V_e`.
pub fn inject_gradient<T: Real>(geom: &ElementGeometry<T>, density: &[T], regions: &RegionMap<T>) -> Vec<T> {
    regions
        .assignment
        .iter()
        .enumerate()
        .map(|(e, &r)| density[r] * geom.volume(e))
        .collect()
}

/// Pseudo-time relaxation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation<T> {
    pub dtau: T,
    pub steps: usize,
}

/// Smoother applied to element densities (gradient or conductivity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing<T> {
    None,
    Spea { passes: usize },
    Laplacian { lambda: T },
    /// Pseudo-Laplacian; solved by relaxation when `relaxation` is set,
    /// otherwise directly.
    PseudoLaplacian {
        lambda: T,
        relaxation: Option<Relaxation<T>>,
    },
}

impl<T: Real> Smoothing<T> {
    /// `lambda_pl = 0.05` relaxed with `dtau = 0.8` for 10 steps.
    pub fn default_pseudo_laplacian() -> Self {
        Smoothing::PseudoLaplacian {
            lambda: T::lit(0.05),
            relaxation: Some(Relaxation {
                dtau: T::lit(0.8),
                steps: 10,
            }),
        }
    }

    /// Smooths an element density field. The field is averaged to nodes,
    /// smoothed there, and mapped back to elements by the nodal mean.
    pub fn apply(
        &self,
        mesh: &SimplexMesh<T>,
        geom: &ElementGeometry<T>,
        elem_field: &[T],
        opts: &SolverOptions<T>,
    ) -> Result<Vec<T>> {
        match *self {
            Smoothing::None => Ok(elem_field.to_vec()),
            Smoothing::Spea { passes } => smooth_spea(mesh, geom, elem_field, passes),
            Smoothing::Laplacian { lambda } => {
                let nodal = elements_to_points(mesh, geom, elem_field)?;
                let s = smooth_h1(mesh, geom, &nodal, lambda, opts)?;
                points_to_elements(mesh, &s)
            }
            Smoothing::PseudoLaplacian { lambda, relaxation } => {
                let nodal = elements_to_points(mesh, geom, elem_field)?;
                let s = match relaxation {
                    None => smooth_pseudo_laplacian(mesh, geom, &nodal, lambda, opts)?,
                    Some(Relaxation { dtau, steps }) => {
                        if !(lambda >= T::zero()) {
                            return Err(Error::invalid("lambda_pl must be non-negative"));
                        }
                        let mass = assemble_mass(mesh, geom);
                        let (lhs, rhs) = pseudo_laplacian_system(&mass, &nodal, lambda);
                        relax_solve(&lhs, &rhs, &nodal, dtau, steps)?
                    }
                };
                points_to_elements(mesh, &s)
            }
        }
    }
}
