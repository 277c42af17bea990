//! Adjoint gradient verified against central finite differences.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adjoint::total_gradient;
use crate::error::{Error, Result};
use crate::fem::ConductivityField;
use crate::inversion::{fd_gradient_elements, Problem};
use crate::scalar::Real;
use crate::sparse::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckRow<T> {
    pub element_id: usize,
    pub adjoint_grad: T,
    pub fd_grad: T,
    pub rel_error: T,
}

/// `count` distinct element indices drawn with a seeded generator, sorted.
pub fn sample_elements(element_count: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || count > element_count {
        return Err(Error::invalid(format!(
            "cannot sample {count} of {element_count} elements"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = sample(&mut rng, element_count, count).into_vec();
    v.sort_unstable();
    Ok(v)
}

/// `|a - f| / max(|a|, |f|, floor)`; the floor, a tiny fraction of the largest
/// gradient entry, keeps elements with vanishing sensitivity from dividing
/// by zero.
pub fn relative_error<T: Real>(a: T, f: T, floor: T) -> T {
    (a - f).abs() / a.abs().max(f.abs()).max(floor)
}

/// Compares the adjoint gradient at `k` with central differences of relative
/// step `rel_step` on the listed elements. `tamper` may alter the adjoint
/// values before comparison, which lets callers verify that the check fails.
pub fn gradient_check<T: Real>(
    problem: &Problem<'_, T>,
    k: &ConductivityField<T>,
    elements: &[usize],
    rel_step: T,
    opts: &SolverOptions<T>,
    tamper: impl Fn(&mut [T]),
) -> Result<Vec<GradCheckRow<T>>> {
    let (_, g) = total_gradient(problem.mesh, problem.geom, k, problem.boundary, problem.measurements, opts)?;
    let mut adjoint = g.values;
    tamper(&mut adjoint);
    let fd = fd_gradient_elements(problem, k, elements, rel_step, opts)?;
    let floor = adjoint.iter().fold(T::zero(), |m, v| m.max(v.abs())) * T::lit(1e-12) + T::min_positive_value();
    Ok(elements
        .iter()
        .zip(fd)
        .map(|(&e, f)| GradCheckRow {
            element_id: e,
            adjoint_grad: adjoint[e],
            fd_grad: f,
            rel_error: relative_error(adjoint[e], f, floor),
        })
        .collect())
}

pub fn write_gradcheck_csv<T: Real, W: Write>(w: &mut W, rows: &[GradCheckRow<T>]) -> std::io::Result<()> {
    writeln!(w, "element_id,adjoint_grad,fd_grad,rel_error")?;
    for r in rows {
        writeln!(w, "{},{:e},{:e},{:e}", r.element_id, r.adjoint_grad, r.fd_grad, r.rel_error)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_seeded_and_distinct() {
        let a = sample_elements(100, 10, 5).unwrap();
        assert_eq!(a, sample_elements(100, 10, 5).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_elements(5, 6, 0).is_err());
        assert!(sample_elements(5, 0, 0).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0f64, 0.0, 1e-30), 0.0);
        assert!((relative_error(1.0f64, 0.5, 1e-30) - 0.5).abs() < 1e-15);
    }
}
