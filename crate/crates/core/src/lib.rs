//! Finite-element toolkit for the inverse conductivity problem: recover a
//! piecewise-constant conductivity `k` from pairs of boundary potentials and
//! boundary normal fluxes by adjoint-based descent.
//!
//! The numerical core is generic over the floating-point type ([`Real`] is
//! implemented for `f32` and `f64`); the aliases below fix it to `f64`.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod analytic1d;
pub mod error;
pub mod fem;
pub mod gradcheck;
pub mod inversion;
pub mod mesh;
pub mod presets;
pub mod regularization;
pub mod scalar;
pub mod sparse;
pub mod vtk;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh = mesh::SimplexMesh<f64>;
pub type Geometry = mesh::ElementGeometry<f64>;
pub type Conductivity = fem::ConductivityField<f64>;
pub type Potential = fem::ScalarField<f64>;
pub type Flux = fem::BoundaryFlux<f64>;
pub type Boundary = fem::MeasuredBoundary<f64>;
pub type Dirichlet = fem::DirichletData<f64>;
pub type Matrix = sparse::CsrMatrix<f64>;
pub type Measurement = adjoint::Measurement<f64>;
pub type Gradient = adjoint::ElementGradient<f64>;
pub type Regions = regularization::RegionMap<f64>;
pub type Target = inversion::TargetSpec<f64>;
pub type Descent = inversion::DescentConfig<f64>;
pub type Profile1D = analytic1d::PiecewiseConductivity1D<f64>;
pub type Setup = presets::Setup<f64>;
