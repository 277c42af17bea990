//! Ready-made experiment setups: domain, mesh, measured boundary, target
//! conductivity and synthesized measurements.

use crate::adjoint::Measurement;
use crate::error::{Error, Result};
use crate::fem::{ConductivityField, MeasuredBoundary};
use crate::inversion::{build_measurement, build_measurement_with, build_target, Problem, SourceSpec, TargetSpec};
use crate::mesh::{compute_geometry, generate_box_mesh, ElementGeometry, SimplexMesh};
use crate::scalar::Real;
use crate::sparse::SolverOptions;

/// Thickness of the square slab; z-normal faces are insulated.
pub const SLAB_THICKNESS: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Setup<T> {
    pub mesh: SimplexMesh<T>,
    pub geom: ElementGeometry<T>,
    pub boundary: MeasuredBoundary<T>,
    pub target: ConductivityField<T>,
    pub measurements: Vec<Measurement<T>>,
}

impl<T: Real> Setup<T> {
    pub fn problem(&self) -> Problem<'_, T> {
        Problem::new(&self.mesh, &self.geom, &self.boundary, &self.measurements)
            .expect("setups always carry measurements")
    }

    /// Keeps only the first `count` measurements.
    pub fn truncate_measurements(&mut self, count: usize) {
        self.measurements.truncate(count);
    }
}

/// `[0,1]^2 x [0, 0.05]` with `n x n x 1` cells (6 tets each), lateral faces
/// measured and z-faces insulated, `measurements` source/sink pairs (1..=4).
pub fn square_slab<T: Real>(
    n: usize,
    spec: &TargetSpec<T>,
    measurements: usize,
    opts: &SolverOptions<T>,
) -> Result<Setup<T>> {
    let mesh = generate_box_mesh(
        &[T::zero(), T::zero(), T::zero()],
        &[T::one(), T::one(), T::lit(SLAB_THICKNESS)],
        &[n, n, 1],
    )?;
    let boundary = MeasuredBoundary::insulating_axis(&mesh, 2);
    let sources = SourceSpec::unit_square_set(measurements)?;
    assemble(mesh, boundary, spec, &sources, opts)
}

/// Unit cube with `n^3` cells, every face measured, one source/sink pair per
/// axis.
pub fn unit_cube<T: Real>(n: usize, spec: &TargetSpec<T>, opts: &SolverOptions<T>) -> Result<Setup<T>> {
    let mesh = generate_box_mesh(&[T::zero(); 3], &[T::one(); 3], &[n, n, n])?;
    let boundary = MeasuredBoundary::full(&mesh);
    let sources = SourceSpec::unit_cube_set()?;
    assemble(mesh, boundary, spec, &sources, opts)
}

/// `[0,3] x [0,1]` triangulated with `n` cells per unit length, strips of
/// conductivity 1 / 10.1 / 1, and the single boundary potential
/// `(y - 1/2)(x - 1)^2` for `x <= 1`, zero beyond.
pub fn three_region_2d<T: Real>(n: usize, opts: &SolverOptions<T>) -> Result<Setup<T>> {
    if n == 0 {
        return Err(Error::invalid("cell count must be positive"));
    }
    let mesh = generate_box_mesh(&[T::zero(), T::zero()], &[T::lit(3.0), T::one()], &[3 * n, n])?;
    let geom = compute_geometry(&mesh)?;
    let boundary = MeasuredBoundary::full(&mesh);
    let target = build_target(&mesh, &geom, &TargetSpec::three_region())?;
    let half = T::lit(0.5);
    let m = build_measurement_with(
        &mesh,
        &geom,
        &boundary,
        &target,
        0,
        |x| {
            if x[0] <= T::one() {
                (x[1] - half) * (x[0] - T::one()).powi(2)
            } else {
                T::zero()
            }
        },
        opts,
    )?;
    Ok(Setup {
        mesh,
        geom,
        boundary,
        target,
        measurements: vec![m],
    })
}

fn assemble<T: Real>(
    mesh: SimplexMesh<T>,
    boundary: MeasuredBoundary<T>,
    spec: &TargetSpec<T>,
    sources: &[SourceSpec<T>],
    opts: &SolverOptions<T>,
) -> Result<Setup<T>> {
    let geom = compute_geometry(&mesh)?;
    let target = build_target(&mesh, &geom, spec)?;
    let measurements = sources
        .iter()
        .enumerate()
        .map(|(id, s)| build_measurement(&mesh, &geom, &boundary, &target, id, s, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(Setup {
        mesh,
        geom,
        boundary,
        target,
        measurements,
    })
}
