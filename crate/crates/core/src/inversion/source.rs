use crate::adjoint::Measurement;
use crate::error::{Error, Result};
use crate::fem::{boundary_normal_flux, solve_forward_with, ConductivityField, DirichletData, MeasuredBoundary};
use crate::mesh::{ElementGeometry, SimplexMesh};
use crate::scalar::Real;
use crate::sparse::SolverOptions;

/// Localized bump `a exp(-|x - x_i|^2 / r^2)`. Only the first
/// `center.len()` coordinates enter the distance, so a 2-D center on a slab
/// gives data that is constant through the thickness.
#[derive(Debug, Clone, PartialEq)]
pub struct Source<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub amplitude: T,
}

impl<T: Real> Source<T> {
    pub fn new(center: Vec<T>, radius: T, amplitude: T) -> Result<Self> {
        if center.is_empty() || center.len() > 3 {
            return Err(Error::invalid("source center needs 1 to 3 coordinates"));
        }
        if !(radius > T::zero()) {
            return Err(Error::invalid(format!("source radius must be positive, got {radius}")));
        }
        Ok(Self {
            center,
            radius,
            amplitude,
        })
    }

    pub fn eval(&self, x: &[T; 3]) -> T {
        let d2: T = self.center.iter().zip(x).map(|(&c, &p)| (p - c) * (p - c)).sum();
        self.amplitude * (-d2 / (self.radius * self.radius)).exp()
    }
}

/// Superposition of sources defining the boundary potential of one
/// measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec<T> {
    pub sources: Vec<Source<T>>,
}

impl<T: Real> SourceSpec<T> {
    pub fn new(sources: Vec<Source<T>>) -> Self {
        Self { sources }
    }

    /// One source of amplitude +1 at `from` and a sink of -1 at `to`.
    pub fn dipole(from: Vec<T>, to: Vec<T>, radius: T) -> Result<Self> {
        Ok(Self::new(vec![
            Source::new(from, radius, T::one())?,
            Source::new(to, radius, -T::one())?,
        ]))
    }

    pub fn eval(&self, x: &[T; 3]) -> T {
        self.sources.iter().map(|s| s.eval(x)).sum()
    }

    /// Measurement pairs on the unit square: bottom/top midpoints, then
    /// left/right midpoints, then the two diagonals. `count` in 1..=4.
    pub fn unit_square_set(count: usize) -> Result<Vec<Self>> {
        let h = T::lit(0.5);
        let (z, o) = (T::zero(), T::one());
        let pairs = [
            ([h, z], [h, o]),
            ([z, h], [o, h]),
            ([z, z], [o, o]),
            ([o, z], [z, o]),
        ];
        if count == 0 || count > pairs.len() {
            return Err(Error::invalid(format!("square measurement count must be 1..=4, got {count}")));
        }
        pairs[..count]
            .iter()
            .map(|(a, b)| Self::dipole(a.to_vec(), b.to_vec(), h))
            .collect()
    }

    /// Source/sink pairs at the centres of opposite faces of the unit cube,
    /// one pair per axis.
    pub fn unit_cube_set() -> Result<Vec<Self>> {
        let h = T::lit(0.5);
        (0..3)
            .map(|axis| {
                let mut a = vec![h; 3];
                let mut b = vec![h; 3];
                a[axis] = T::zero();
                b[axis] = T::one();
                Self::dipole(a, b, h)
            })
            .collect()
    }
}

/// Dirichlet data from `sources` and the flux a forward solve with
/// `k_target` produces.
pub fn build_measurement<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    boundary: &MeasuredBoundary<T>,
    k_target: &ConductivityField<T>,
    id: usize,
    sources: &SourceSpec<T>,
    opts: &SolverOptions<T>,
) -> Result<Measurement<T>> {
    build_measurement_with(mesh, geom, boundary, k_target, id, |x| sources.eval(x), opts)
}

/// As [`build_measurement`] with an arbitrary boundary potential.
pub fn build_measurement_with<T: Real>(
    mesh: &SimplexMesh<T>,
    geom: &ElementGeometry<T>,
    boundary: &MeasuredBoundary<T>,
    k_target: &ConductivityField<T>,
    id: usize,
    potential: impl Fn(&[T; 3]) -> T,
    opts: &SolverOptions<T>,
) -> Result<Measurement<T>> {
    let dirichlet = DirichletData::from_fn(mesh, boundary, potential);
    let (u, _) = solve_forward_with(mesh, geom, k_target, &dirichlet, opts).map_err(|e| e.for_measurement(id))?;
    let target_flux = boundary_normal_flux(mesh, geom, k_target, boundary, &u)?;
    Ok(Measurement {
        id,
        dirichlet,
        target_flux,
    })
}
