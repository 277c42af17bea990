//! Closed-form analysis of the one-dimensional problem. On `[0, L]` the
//! boundary data only sees the resistance `int 1/k dx`, so any two profiles
//! with the same resistance are indistinguishable from the boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{boundary_normal_flux, solve_forward_with, ConductivityField, DirichletData, MeasuredBoundary};
use crate::mesh::{compute_geometry, SimplexMesh};
use crate::scalar::Real;
use crate::sparse::SolverOptions;

/// Resampling budget of [`nonuniqueness_family`].
pub const MAX_FAMILY_ATTEMPTS: usize = 10_000;

/// Piecewise-constant conductivity on `[breakpoints[0], breakpoints[n]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConductivity1D<T> {
    breakpoints: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> PiecewiseConductivity1D<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<T>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(Error::invalid("a profile needs one more breakpoint than values"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || !breakpoints.iter().all(|b| b.is_finite()) {
            return Err(Error::invalid("breakpoints must be finite and strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > T::zero() && v.is_finite())) {
            return Err(Error::invalid(format!("conductivity values must be positive, got {v}")));
        }
        Ok(Self { breakpoints, values })
    }

    /// Equal intervals over `[0, length]`.
    pub fn uniform(length: T, values: Vec<T>) -> Result<Self> {
        if !(length > T::zero()) {
            return Err(Error::invalid("length must be positive"));
        }
        let n = T::lit(values.len() as f64);
        let breakpoints = (0..=values.len()).map(|i| length * T::lit(i as f64) / n).collect();
        Self::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn intervals(&self) -> usize {
        self.values.len()
    }

    pub fn length(&self) -> T {
        self.breakpoints[self.values.len()] - self.breakpoints[0]
    }

    /// Reorders the intervals (their widths travel with their values).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.intervals()];
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("order is not a permutation of the intervals"));
            }
        }
        if order.len() != seen.len() {
            return Err(Error::invalid("order is not a permutation of the intervals"));
        }
        let mut breakpoints = vec![self.breakpoints[0]];
        let mut values = Vec::with_capacity(order.len());
        for &i in order {
            let w = self.breakpoints[i + 1] - self.breakpoints[i];
            breakpoints.push(*breakpoints.last().expect("non-empty") + w);
            values.push(self.values[i]);
        }
        Self::new(breakpoints, values)
    }
}

/// `sum_i dx_i / k_i`
pub fn resistance<T: Real>(profile: &PiecewiseConductivity1D<T>) -> T {
    profile
        .breakpoints
        .windows(2)
        .zip(&profile.values)
        .map(|(w, &k)| (w[1] - w[0]) / k)
        .sum()
}

/// Flux `f_c = k du/dx`, constant along the bar, and the potential at every
/// breakpoint for end values `u0`, `uL`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData<T> {
    pub flux: T,
    pub nodal: Vec<T>,
}

pub fn boundary_data<T: Real>(profile: &PiecewiseConductivity1D<T>, u0: T, ul: T) -> BoundaryData<T> {
    let flux = (ul - u0) / resistance(profile);
    let mut nodal = Vec::with_capacity(profile.breakpoints.len());
    let mut u = u0;
    nodal.push(u);
    for (w, &k) in profile.breakpoints.windows(2).zip(&profile.values) {
        u += flux * (w[1] - w[0]) / k;
        nodal.push(u);
    }
    // pin the far end exactly
    *nodal.last_mut().expect("non-empty") = ul;
    BoundaryData { flux, nodal }
}

/// The four-interval profiles on `[0, 1]` used to illustrate
/// non-uniqueness; all have `sum 1/k_i = 4`.
pub fn reference_profiles<T: Real>() -> Vec<(&'static str, PiecewiseConductivity1D<T>)> {
    let l = |v: &[f64]| {
        PiecewiseConductivity1D::uniform(T::one(), v.iter().map(|&x| T::lit(x)).collect()).expect("valid profile")
    };
    vec![
        ("a", l(&[1.0, 1.0, 1.0, 1.0])),
        ("b", l(&[2.0, 2.0, 2.0 / 3.0, 2.0 / 3.0])),
        ("c", l(&[10.0, 5.0, 2.0, 10.0 / 32.0])),
    ]
}

/// Random profile of `n` equal intervals on `[0, 1]` whose resistance equals
/// `resistance_target`. The first `n - 1` inverse conductivities are drawn
/// around the mean and the last one is solved from the constraint; draws
/// forcing a non-positive last value are rejected, at most
/// [`MAX_FAMILY_ATTEMPTS`] times.
pub fn nonuniqueness_family<T: Real>(
    resistance_target: T,
    n: usize,
    seed: u64,
) -> Result<PiecewiseConductivity1D<T>> {
    if n < 2 {
        return Err(Error::invalid(
            "a family member needs at least two intervals; one interval is uniquely determined",
        ));
    }
    if !(resistance_target > T::zero() && resistance_target.is_finite()) {
        return Err(Error::invalid("target resistance must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx = T::one() / T::lit(n as f64);
    let mean_inv = resistance_target; // 1/k giving the target on the whole bar
    for _ in 0..MAX_FAMILY_ATTEMPTS {
        let mut values = Vec::with_capacity(n);
        let mut partial = T::zero();
        for _ in 0..n - 1 {
            let inv_k = mean_inv * T::lit(rng.gen_range(0.1..1.9));
            values.push(T::one() / inv_k);
            partial += dx / values[values.len() - 1];
        }
        let rest = resistance_target - partial;
        if rest > resistance_target * T::lit(1e-3) {
            values.push(dx / rest);
            return PiecewiseConductivity1D::uniform(T::one(), values);
        }
    }
    Err(Error::invalid(format!(
        "no admissible profile found in {MAX_FAMILY_ATTEMPTS} attempts"
    )))
}

/// Boundary data of `profile` from the finite-element solver, on a segment
/// mesh with `refine` elements per interval.
pub fn fem_boundary_data<T: Real>(
    profile: &PiecewiseConductivity1D<T>,
    u0: T,
    ul: T,
    refine: usize,
    opts: &SolverOptions<T>,
) -> Result<BoundaryData<T>> {
    if refine == 0 {
        return Err(Error::invalid("refinement must be at least 1"));
    }
    let mut nodes = vec![[profile.breakpoints[0], T::zero(), T::zero()]];
    let mut k = Vec::new();
    for (w, &v) in profile.breakpoints.windows(2).zip(&profile.values) {
        for j in 1..=refine {
            let t = T::lit(j as f64) / T::lit(refine as f64);
            let x = if j == refine { w[1] } else { w[0] + (w[1] - w[0]) * t };
            nodes.push([x, T::zero(), T::zero()]);
            k.push(v);
        }
    }
    let elements: Vec<usize> = (0..k.len()).flat_map(|e| [e, e + 1]).collect();
    let last = k.len();
    let mesh = SimplexMesh::new(1, nodes, elements)?;
    let geom = compute_geometry(&mesh)?;
    let k = ConductivityField::new(k)?;
    let boundary = MeasuredBoundary::full(&mesh);
    let bc = DirichletData::new(vec![0, last], vec![u0, ul])?;
    let (u, _) = solve_forward_with(&mesh, &geom, &k, &bc, opts)?;
    let flux = boundary_normal_flux(&mesh, &geom, &k, &boundary, &u)?;
    let right = mesh
        .boundary_faces()
        .iter()
        .position(|f| f.nodes == [last])
        .ok_or_else(|| Error::invalid("right end face missing"))?;
    Ok(BoundaryData {
        flux: flux.values[right],
        nodal: u.values.iter().copied().step_by(refine).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_profiles_share_data() {
        for (name, p) in reference_profiles::<f64>() {
            let inv: f64 = p.values().iter().map(|k| 1.0 / k).sum();
            assert!((inv - 4.0).abs() < 1e-12, "{name}");
            assert!((resistance(&p) - 1.0).abs() < 1e-12);
            let d = boundary_data(&p, 1.0, 0.0);
            assert!((d.flux + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn case_b_breakpoint_values() {
        let (_, b) = &reference_profiles::<f64>()[1];
        let d = boundary_data(b, 1.0, 0.0);
        for (u, e) in d.nodal.iter().zip([1.0, 0.875, 0.75, 0.375, 0.0]) {
            assert!((u - e).abs() < 1e-14);
        }
    }

    #[test]
    fn permutation_keeps_flux() {
        let (_, c) = &reference_profiles::<f64>()[2];
        let p = c.permuted(&[3, 1, 0, 2]).unwrap();
        assert_eq!(p.values(), &[10.0 / 32.0, 5.0, 10.0, 2.0]);
        let a = boundary_data(c, 1.0, 0.0).flux;
        let b = boundary_data(&p, 1.0, 0.0).flux;
        assert!((a - b).abs() < 1e-14);
        assert!(c.permuted(&[0, 0, 1, 2]).is_err());
    }

    #[test]
    fn single_interval_family_rejected() {
        assert!(nonuniqueness_family(1.0f64, 1, 3).is_err());
        assert!(nonuniqueness_family(0.0f64, 3, 3).is_err());
    }

    #[test]
    fn different_seeds_different_profiles() {
        let a = nonuniqueness_family(1.0f64, 4, 1).unwrap();
        let b = nonuniqueness_family(1.0f64, 4, 2).unwrap();
        assert_ne!(a.values(), b.values());
        let (da, db) = (boundary_data(&a, 1.0, 0.0), boundary_data(&b, 1.0, 0.0));
        assert!((da.flux - db.flux).abs() < 1e-12);
        assert_eq!(nonuniqueness_family(1.0f64, 4, 1).unwrap(), a);
    }

    #[test]
    fn fem_is_nodally_exact() {
        for (_, p) in reference_profiles::<f64>() {
            let exact = boundary_data(&p, 1.0, 0.0);
            for refine in [1, 3] {
                let fem = fem_boundary_data(&p, 1.0, 0.0, refine, &SolverOptions::tight()).unwrap();
                assert!((fem.flux - exact.flux).abs() < 1e-10);
                for (a, b) in fem.nodal.iter().zip(&exact.nodal) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn family_members_match_target(r in 0.05f64..20.0, n in 2usize..12, seed in any::<u64>()) {
            let p = nonuniqueness_family(r, n, seed).unwrap();
            prop_assert!(p.values().iter().all(|&k| k > 0.0));
            prop_assert!(((resistance(&p) - r) / r).abs() < 1e-12);
            let d = boundary_data(&p, 1.0, 0.0);
            prop_assert!((d.flux * r + 1.0).abs() < 1e-12);
        }
    }
}
