//! The optimization cycle: synthesize measurements from a target
//! conductivity, then drive an initial guess towards data agreement with
//! adjoint or finite-difference gradients.

mod descent;
mod fd;
mod metrics;
mod parametric;
mod source;
mod target;

use std::io::Write;

pub use descent::{run_descent, DescentConfig, DescentResult, GradientMethod, StopReason};
pub use fd::{fd_gradient_elements, fd_gradient_regions, RegionGradient};
pub use metrics::{flux_error_norm, k_l2_error};
pub use parametric::{run_parametric_disk, DiskParameters, ParametricConfig, ParametricDirection, ParametricResult};
pub use source::{build_measurement, build_measurement_with, Source, SourceSpec};
pub use target::{build_target, TargetSpec};

use crate::adjoint::Measurement;
use crate::error::{Error, Result};
use crate::fem::MeasuredBoundary;
use crate::mesh::{ElementGeometry, SimplexMesh};
use crate::scalar::Real;

/// Mesh, boundary and data shared by every cost evaluation of one inversion.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a, T> {
    pub mesh: &'a SimplexMesh<T>,
    pub geom: &'a ElementGeometry<T>,
    pub boundary: &'a MeasuredBoundary<T>,
    pub measurements: &'a [Measurement<T>],
}

impl<'a, T: Real> Problem<'a, T> {
    pub fn new(
        mesh: &'a SimplexMesh<T>,
        geom: &'a ElementGeometry<T>,
        boundary: &'a MeasuredBoundary<T>,
        measurements: &'a [Measurement<T>],
    ) -> Result<Self> {
        if measurements.is_empty() {
            return Err(Error::invalid("at least one measurement is required"));
        }
        if geom.element_count() != mesh.element_count() {
            return Err(Error::invalid("geometry does not belong to the mesh"));
        }
        Ok(Self {
            mesh,
            geom,
            boundary,
            measurements,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub iter: usize,
    pub cost: f64,
    pub flux_error: f64,
    /// Relative L2 distance to the target, when one is known.
    pub k_l2_error: Option<f64>,
    /// Step length that produced this iterate (0 for the initial state).
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub records: Vec<HistoryRecord>,
}

impl ConvergenceHistory {
    pub fn push(&mut self, record: HistoryRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&HistoryRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&HistoryRecord> {
        self.records.last()
    }

    /// First iteration whose cost is at most `fraction` of the initial cost.
    pub fn iterations_to_fraction(&self, fraction: f64) -> Option<usize> {
        let c0 = self.first()?.cost;
        self.records
            .iter()
            .find(|r| r.cost <= fraction * c0)
            .map(|r| r.iter)
    }

    /// CSV with header `iter,cost,flux_error,k_l2_error,alpha`; the k error
    /// column is empty when no target was supplied.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "iter,cost,flux_error,k_l2_error,alpha")?;
        for r in &self.records {
            let k = r.k_l2_error.map(|v| format!("{v:e}")).unwrap_or_default();
            writeln!(w, "{},{:e},{:e},{},{:e}", r.iter, r.cost, r.flux_error, k, r.alpha)?;
        }
        Ok(())
    }
}
