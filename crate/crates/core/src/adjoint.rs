//! Boundary-flux misfit, its adjoint problem, and the per-element gradient.
//!
//! For each measurement the adjoint field solves the same conductivity
//! equation as the state, with Dirichlet values equal to minus the flux
//! mismatch `-(f_m - f_n)` on the measured boundary. The derivative of the
//! misfit with respect to the conductivity of element `e` is then
//! `V_e grad u . grad u~`, at the price of one extra solve per measurement
//! regardless of how many elements there are.

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, boundary_normal_flux, solve_dirichlet, BoundaryFlux, ConductivityField,
    DirichletData, MeasuredBoundary, ScalarField,
};
use crate::mesh::{ElementGeometry, SimplexMesh};
use crate::scalar::{dot3, Real};
use crate::sparse::SolverOptions;

/// Dirichlet data paired with the normal-flux response it should produce.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<T> {
    pub id: usize,
    pub dirichlet: DirichletData<T>,
    pub target_flux: BoundaryFlux<T>,
}

/// `dI/dk_e` per element. Values carry the element volume; divide by `V_e`
/// for a mesh-independent density.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGradient<T> {
    pub values: Vec<T>,
}

impl<T: Real> ElementGradient<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
        }
    }

    pub fn density(&self, geom: &ElementGeometry<T>) -> Vec<T> {
        self.values
            .iter()
            .enumerate()
            .map(|(e, &g)| g / geom.volume(e))
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// `1/2 sum_faces (f_m - f_n)^2 |face|` over the measured faces.
pub fn evaluate_cost<T: Real>(
    mesh: &SimplexMesh<T>,
    boundary: &MeasuredBoundary<T>,
    computed: &BoundaryFlux<T>,
    measurement: &Measurement<T>,
) -> Result<T> {
    let nf = mesh.boundary_faces().len();
    if computed.values.len() != nf || measurement.target_flux.values.len() != nf {
        return Err(Error::invalid(format!(
            "flux vectors of length {} / {} do not match {nf} boundary faces",
            computed.values.len(),
            measurement.target_flux.values.len()
        )));
    }
    let half = T::lit(0.5);
    Ok(mesh
        .boundary_faces()
        .iter()
        .enumerate()
        .filter(|(f, _)| boundary.is_active(*f))
        .map(|(f, face)| {
            let d = measurement.target_flux.values[f] - computed.values[f];
            half * d * d * face.measure
        })
        .sum())
}

/// Nodal adjoint boundary values from face mismatches `f_m - f_n`:
/// `u~_b = -sum_{f ∋ b} |f| (f_m - f_n)_f / sum_{f ∋ b} |f|`.
pub fn adjoint_boundary_values<T: Real>(
    mesh: &SimplexMesh<T>,
    boundary: &MeasuredBoundary<T>,
    mismatch: &[T],
) -> DirichletData<T> {
    let mut acc = vec![T::zero(); mesh.node_count()];
    for (f, face) in mesh.boundary_faces().iter().enumerate() {
        if !boundary.is_active(f) {
            continue;
        }
        for &n in &face.nodes {
            acc[n] += face.measure * mismatch[f];
        }
    }
    let nodes = boundary.nodes().to_vec();
    let values = nodes
        .iter()
        .map(|&n| -acc[n] / boundary.node_weight(n))
        .collect();
    DirichletData::new(nodes, values).expect("boundary nodes are sorted and values finite")
}

pub fn solve_adjoint<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    boundary: &MeasuredBoundary<T>,
    u: &ScalarField<T>,
    measurement: &Measurement<T>,
    opts: &SolverOptions<T>,
) -> Result<ScalarField<T>> {
    let computed = boundary_normal_flux(mesh, geom, k, boundary, u)?;
    let mismatch: Vec<T> = measurement
        .target_flux
        .values
        .iter()
        .zip(&computed.values)
        .map(|(&t, &c)| t - c)
        .collect();
    let bc = adjoint_boundary_values(mesh, boundary, &mismatch);
    let a = assemble_stiffness(mesh, geom, k)?;
    solve_dirichlet(mesh, &a, &bc, opts).map(|(v, _)| v)
}

/// `g_e = V_e grad u . grad u~`
pub fn cost_gradient<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    u: &ScalarField<T>,
    adjoint: &ScalarField<T>,
) -> Result<ElementGradient<T>> {
    let n = mesh.node_count();
    if u.values.len() != n || adjoint.values.len() != n {
        return Err(Error::invalid("state and adjoint must have one value per node"));
    }
    let values = (0..mesh.element_count())
        .map(|e| {
            let gu = geom.field_gradient(mesh, e, &u.values);
            let ga = geom.field_gradient(mesh, e, &adjoint.values);
            geom.volume(e) * dot3(&gu, &ga)
        })
        .collect();
    Ok(ElementGradient { values })
}

/// Everything one forward/adjoint sweep over all measurements produces.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub cost: T,
    pub gradient: ElementGradient<T>,
    /// Computed boundary flux per measurement.
    pub fluxes: Vec<BoundaryFlux<T>>,
    pub states: Vec<ScalarField<T>>,
    pub adjoints: Vec<ScalarField<T>>,
}

/// Misfit and its gradient summed over measurements, using exactly one
/// forward and one adjoint solve per measurement. Contributions are summed
/// in measurement order.
pub fn evaluate<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    boundary: &MeasuredBoundary<T>,
    measurements: &[Measurement<T>],
    opts: &SolverOptions<T>,
) -> Result<Evaluation<T>> {
    if measurements.is_empty() {
        return Err(Error::invalid("at least one measurement is required"));
    }
    let a = assemble_stiffness(mesh, geom, k)?;
    let mut out = Evaluation {
        cost: T::zero(),
        gradient: ElementGradient::zeros(mesh.element_count()),
        fluxes: Vec::with_capacity(measurements.len()),
        states: Vec::with_capacity(measurements.len()),
        adjoints: Vec::with_capacity(measurements.len()),
    };
    for m in measurements {
        let step = || -> Result<_> {
            if !m.dirichlet.covers(boundary) {
                return Err(Error::invalid("Dirichlet data does not cover the measured boundary"));
            }
            let (u, _) = solve_dirichlet(mesh, &a, &m.dirichlet, opts)?;
            let flux = boundary_normal_flux(mesh, geom, k, boundary, &u)?;
            let cost = evaluate_cost(mesh, boundary, &flux, m)?;
            let mismatch: Vec<T> = m
                .target_flux
                .values
                .iter()
                .zip(&flux.values)
                .map(|(&t, &c)| t - c)
                .collect();
            let bc = adjoint_boundary_values(mesh, boundary, &mismatch);
            let (adj, _) = solve_dirichlet(mesh, &a, &bc, opts)?;
            let grad = cost_gradient(mesh, geom, &u, &adj)?;
            Ok((u, flux, cost, adj, grad))
        };
        let (u, flux, cost, adj, grad) = step().map_err(|e| e.for_measurement(m.id))?;
        out.cost += cost;
        for (acc, g) in out.gradient.values.iter_mut().zip(&grad.values) {
            *acc += *g;
        }
        out.fluxes.push(flux);
        out.states.push(u);
        out.adjoints.push(adj);
    }
    Ok(out)
}

pub fn total_gradient<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    boundary: &MeasuredBoundary<T>,
    measurements: &[Measurement<T>],
    opts: &SolverOptions<T>,
) -> Result<(T, ElementGradient<T>)> {
    evaluate(mesh, geom, k, boundary, measurements, opts).map(|ev| (ev.cost, ev.gradient))
}

/// Misfit only: one forward solve per measurement.
pub fn total_cost<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    k: &ConductivityField<T>,
    boundary: &MeasuredBoundary<T>,
    measurements: &[Measurement<T>],
    opts: &SolverOptions<T>,
) -> Result<T> {
    let a = assemble_stiffness(mesh, geom, k)?;
    let mut cost = T::zero();
    for m in measurements {
        let c = (|| -> Result<T> {
            let (u, _) = solve_dirichlet(mesh, &a, &m.dirichlet, opts)?;
            let flux = boundary_normal_flux(mesh, geom, k, boundary, &u)?;
            evaluate_cost(mesh, boundary, &flux, m)
        })()
        .map_err(|e| e.for_measurement(m.id))?;
        cost += c;
    }
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::solve_forward;
    use crate::mesh::{compute_geometry, generate_box_mesh};

    fn slab(n: usize) -> (SimplexMesh<f64>, ElementGeometry<f64>, MeasuredBoundary<f64>) {
        let m = generate_box_mesh(&[0.0, 0.0, 0.0], &[1.0, 1.0, 0.05], &[n, n, 1]).unwrap();
        let g = compute_geometry(&m).unwrap();
        let b = MeasuredBoundary::insulating_axis(&m, 2);
        (m, g, b)
    }

    fn synth(
        m: &SimplexMesh<f64>,
        g: &ElementGeometry<f64>,
        b: &MeasuredBoundary<f64>,
        k: &ConductivityField<f64>,
        id: usize,
        f: impl Fn(&[f64; 3]) -> f64,
    ) -> Measurement<f64> {
        let bc = DirichletData::from_fn(m, b, f);
        let u = solve_forward(m, g, k, &bc).unwrap();
        Measurement {
            id,
            dirichlet: bc,
            target_flux: boundary_normal_flux(m, g, k, b, &u).unwrap(),
        }
    }

    #[test]
    fn unit_mismatch_cost_on_slab() {
        let (m, _, b) = slab(5);
        let nf = m.boundary_faces().len();
        let meas = Measurement {
            id: 0,
            dirichlet: DirichletData::from_fn(&m, &b, |_| 0.0),
            target_flux: BoundaryFlux { values: vec![1.0; nf] },
        };
        let zero = BoundaryFlux { values: vec![0.0; nf] };
        let c = evaluate_cost(&m, &b, &zero, &meas).unwrap();
        assert!((c - 0.1).abs() < 1e-12);
        let meas2 = Measurement {
            target_flux: BoundaryFlux { values: vec![2.0; nf] },
            ..meas.clone()
        };
        assert!((evaluate_cost(&m, &b, &zero, &meas2).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(evaluate_cost(&m, &b, &meas.target_flux, &meas).unwrap(), 0.0);
        let short = BoundaryFlux { values: vec![0.0; 3] };
        assert!(evaluate_cost(&m, &b, &short, &meas).is_err());
    }

    #[test]
    fn self_consistent_data_gives_zero_adjoint() {
        let (m, g, b) = slab(4);
        let k = ConductivityField::uniform(m.element_count(), 2.0).unwrap();
        let meas = synth(&m, &g, &b, &k, 0, |p| p[0] * p[0] - p[1]);
        let u = solve_forward(&m, &g, &k, &meas.dirichlet).unwrap();
        let adj = solve_adjoint(&m, &g, &k, &b, &u, &meas, &SolverOptions::default()).unwrap();
        assert!(adj.values.iter().all(|v| v.abs() <= 1e-8));
        let grad = cost_gradient(&m, &g, &u, &adj).unwrap();
        assert!(grad.max_abs() <= 1e-8);
    }

    #[test]
    fn adjoint_sign_follows_mismatch() {
        let (m, g, b) = slab(4);
        let k = ConductivityField::uniform(m.element_count(), 1.0).unwrap();
        let mut meas = synth(&m, &g, &b, &k, 0, |p| p[0]);
        // computed flux exceeds the target on every face of x = 1
        for (f, face) in m.boundary_faces().iter().enumerate() {
            if face.normal[0] > 0.9 {
                meas.target_flux.values[f] -= 1.0;
            }
        }
        let u = solve_forward(&m, &g, &k, &meas.dirichlet).unwrap();
        let adj = solve_adjoint(&m, &g, &k, &b, &u, &meas, &SolverOptions::default()).unwrap();
        for &n in b.nodes() {
            if m.node(n)[0] == 1.0 {
                assert!(adj.values[n] > 0.0);
            }
        }
    }

    #[test]
    fn gradient_quadratic_form() {
        let (m, g, _) = slab(3);
        let u = ScalarField {
            values: m.nodes().iter().map(|p| p[0] * p[1] + p[2]).collect(),
        };
        let grad = cost_gradient(&m, &g, &u, &u).unwrap();
        assert!(grad.values.iter().all(|&v| v >= 0.0));
        let zero = ScalarField::zeros(m.node_count());
        assert_eq!(cost_gradient(&m, &g, &u, &zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn duplicated_measurement_doubles_everything() {
        let (m, g, b) = slab(3);
        let target = ConductivityField::new(
            (0..m.element_count()).map(|e| 1.0 + (e % 4) as f64 * 0.3).collect(),
        )
        .unwrap();
        let meas = synth(&m, &g, &b, &target, 0, |p| (p[0] - 0.5) * (p[1] + 0.2));
        let k = ConductivityField::uniform(m.element_count(), 1.3).unwrap();
        let opts = SolverOptions::default();
        let (c1, g1) = total_gradient(&m, &g, &k, &b, std::slice::from_ref(&meas), &opts).unwrap();
        let (c2, g2) = total_gradient(&m, &g, &k, &b, &[meas.clone(), meas], &opts).unwrap();
        assert!(c1 > 0.0);
        assert_eq!(c2, 2.0 * c1);
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn solver_errors_carry_measurement_id() {
        let (m, g, b) = slab(2);
        let k = ConductivityField::uniform(m.element_count(), 1.0).unwrap();
        let mut meas = synth(&m, &g, &b, &k, 7, |p| p[0]);
        meas.dirichlet = DirichletData::new(vec![0], vec![0.0]).unwrap();
        let err = total_gradient(&m, &g, &k, &b, &[meas], &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Measurement { id: 7, .. }));
    }
}
