use super::Problem;
use crate::adjoint::total_cost;
use crate::error::{Error, Result};
use crate::fem::ConductivityField;
use crate::regularization::RegionMap;
use crate::scalar::Real;
use crate::sparse::SolverOptions;

/// Central-difference region gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGradient<T> {
    /// `dI/d(shift of region r) / V_r`, directly comparable to
    /// [`crate::regularization::project_gradient`] of the adjoint gradient.
    pub density: Vec<T>,
    /// Forward solves spent, `2 * regions * measurements`.
    pub forward_solves: usize,
}

/// Differentiates the total misfit with respect to a uniform additive shift
/// `step` of the conductivity on each region. Only forward solves are used.
pub fn fd_gradient_regions<T: Real>(
    problem: &Problem<'_, T>,
    k_base: &ConductivityField<T>,
    regions: &RegionMap<T>,
    step: T,
    opts: &SolverOptions<T>,
) -> Result<RegionGradient<T>> {
    if !(step > T::zero()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    if regions.assignment().len() != k_base.len() {
        return Err(Error::invalid("region map does not match the conductivity field"));
    }
    let mut density = Vec::with_capacity(regions.region_count());
    let mut work = k_base.values().to_vec();
    for r in 0..regions.region_count() {
        let cost_at = |shift: T, work: &mut Vec<T>| -> Result<T> {
            for (e, w) in work.iter_mut().enumerate() {
                *w = k_base.values()[e] + if regions.region_of(e) == r { shift } else { T::zero() };
            }
            let k = ConductivityField::new(work.clone())?;
            total_cost(problem.mesh, problem.geom, &k, problem.boundary, problem.measurements, opts)
        };
        let plus = cost_at(step, &mut work)?;
        let minus = cost_at(-step, &mut work)?;
        density.push((plus - minus) / (step + step) / regions.volume(r));
    }
    Ok(RegionGradient {
        density,
        forward_solves: 2 * regions.region_count() * problem.measurements.len(),
    })
}

/// Central differences of the total misfit with respect to the listed
/// element conductivities, each perturbed by `rel_step * k_e`. The result
/// is comparable to the adjoint `ElementGradient` values.
pub fn fd_gradient_elements<T: Real>(
    problem: &Problem<'_, T>,
    k_base: &ConductivityField<T>,
    elements: &[usize],
    rel_step: T,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    if !(rel_step > T::zero() && rel_step < T::one()) {
        return Err(Error::invalid(format!("relative step must lie in (0, 1), got {rel_step}")));
    }
    let mut work = k_base.values().to_vec();
    let mut out = Vec::with_capacity(elements.len());
    for &e in elements {
        if e >= work.len() {
            return Err(Error::invalid(format!("element {e} out of range")));
        }
        let h = rel_step * k_base.values()[e];
        let mut cost_at = |v: T| -> Result<T> {
            work[e] = v;
            let k = ConductivityField::new(work.clone())?;
            total_cost(problem.mesh, problem.geom, &k, problem.boundary, problem.measurements, opts)
        };
        let plus = cost_at(k_base.values()[e] + h)?;
        let minus = cost_at(k_base.values()[e] - h)?;
        work[e] = k_base.values()[e];
        out.push((plus - minus) / (h + h));
    }
    Ok(out)
}
