//! Compressed-row matrices on a mesh sparsity pattern and a Jacobi
//! preconditioned conjugate-gradient solver.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::SparsityPattern;
use crate::scalar::Real;

/// Square sparse matrix sharing its pattern with the mesh it was assembled on.
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    pattern: Arc<SparsityPattern>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![T::zero(); pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn rows(&self) -> usize {
        self.pattern.rows()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Entry `(i, j)`, zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (lo, hi) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
        match self.pattern.cols[lo..hi].binary_search(&j) {
            Ok(p) => self.values[lo + p],
            Err(_) => T::zero(),
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (lo, hi) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
        self.pattern.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[k] * x[p.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows()];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows()).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows()).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `a * self + b * other`; both matrices must share a pattern.
    pub fn linear_combination(&self, a: T, other: &CsrMatrix<T>, b: T) -> CsrMatrix<T> {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || *self.pattern == *other.pattern,
            "matrices must share a sparsity pattern"
        );
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        CsrMatrix {
            pattern: Arc::clone(&self.pattern),
            values,
        }
    }

    pub fn add_diagonal(&mut self, d: &[T]) {
        for (i, &di) in d.iter().enumerate() {
            let (lo, hi) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
            let p = self.pattern.cols[lo..hi]
                .binary_search(&i)
                .expect("diagonal in pattern");
            self.values[lo + p] += di;
        }
    }

    /// Largest `|A_ij - A_ji|` relative to the largest `|A_ij|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        let mut scale = T::zero();
        for i in 0..self.rows() {
            for (j, v) in self.row(i) {
                scale = scale.max(v.abs());
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale > T::zero() {
            worst / scale
        } else {
            worst
        }
    }

    /// Scatters a dense `(dim+1)^2` element matrix using the pattern's
    /// precomputed slots.
    pub(crate) fn add_element(&mut self, e: usize, local: &[T]) {
        let n2 = local.len();
        let slots = &self.pattern.element_slots[e * n2..(e + 1) * n2];
        for (&s, &v) in slots.iter().zip(local) {
            self.values[s] += v;
        }
    }
}

/// Stopping rules for the conjugate-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Relative residual target `|r| <= rel_tol * |b|` on the reduced system.
    pub rel_tol: T,
    /// Iteration cap as a multiple of the matrix dimension.
    pub max_iter_factor: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::default_tolerance(),
            max_iter_factor: 10,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    /// Near machine precision, for finite-difference checks where the
    /// difference of two solves must not be polluted by solver tolerance.
    pub fn tight() -> Self {
        Self {
            rel_tol: T::epsilon() * T::lit(64.0),
            max_iter_factor: 50,
        }
    }

    pub fn with_tolerance(rel_tol: T) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` for the unknowns not flagged in `fixed`, holding the
/// flagged entries of `x` at their incoming values (Dirichlet elimination).
///
/// Rows and columns of fixed unknowns are removed implicitly, so the reduced
/// operator stays symmetric. Free entries of `x` are used as the initial
/// guess. Fails on a non-positive curvature `p^T A p` or when the iteration
/// cap is reached.
pub fn conjugate_gradient<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    fixed: Option<&[bool]>,
    opts: &SolverOptions<T>,
) -> Result<SolveStats> {
    let n = a.rows();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let is_free = |i: usize| fixed.is_none_or(|f| !f[i]);
    let zero = T::zero();

    // reduced right-hand side b_F - A_FD x_D, for the convergence reference
    let mut xd = x.to_vec();
    for (i, v) in xd.iter_mut().enumerate() {
        if is_free(i) {
            *v = zero;
        }
    }
    let mut tmp = vec![zero; n];
    a.mul_vec(&xd, &mut tmp);
    let mut bnorm2 = zero;
    for i in 0..n {
        if is_free(i) {
            let v = b[i] - tmp[i];
            bnorm2 += v * v;
        }
    }
    let bnorm = bnorm2.sqrt();

    let diag = a.diagonal();
    let inv_diag: Vec<T> = diag
        .iter()
        .map(|&d| if d > zero { T::one() / d } else { T::one() })
        .collect();

    a.mul_vec(x, &mut tmp);
    let mut r = vec![zero; n];
    for i in 0..n {
        if is_free(i) {
            r[i] = b[i] - tmp[i];
        }
    }
    if bnorm == zero {
        // homogeneous reduced system: the solution is zero on the free set
        for i in 0..n {
            if is_free(i) {
                x[i] = zero;
            }
        }
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![zero; n];
    let cap = opts.max_iter_factor.max(1) * n.max(1);

    let mut rnorm = dot(&r, &r).sqrt();
    let mut it = 0;
    while rnorm > opts.rel_tol * bnorm {
        if it >= cap {
            return Err(Error::NotConverged {
                iterations: it,
                residual: (rnorm / bnorm).to_f64_lossy(),
            });
        }
        a.mul_vec(&p, &mut q);
        if let Some(f) = fixed {
            for (qi, &fi) in q.iter_mut().zip(f) {
                if fi {
                    *qi = zero;
                }
            }
        }
        let curvature = dot(&p, &q);
        if !(curvature > zero) {
            return Err(Error::Indefinite {
                iteration: it,
                curvature: curvature.to_f64_lossy(),
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = dot(&r, &r).sqrt();
        it += 1;
    }

    Ok(SolveStats {
        iterations: it,
        relative_residual: (rnorm / bnorm).to_f64_lossy(),
    })
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;

    /// 1-D graph Laplacian plus identity on a 6-node path.
    fn path_matrix() -> CsrMatrix<f64> {
        let mesh = generate_box_mesh(&[0.0], &[1.0], &[5]).unwrap();
        let mut a = CsrMatrix::zeros(mesh.pattern().clone());
        for e in 0..mesh.element_count() {
            a.add_element(e, &[1.0, -1.0, -1.0, 1.0]);
        }
        a.add_diagonal(&[1.0; 6]);
        a
    }

    #[test]
    fn cg_matches_known_solution() {
        let a = path_matrix();
        let x_true: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let b = a.apply(&x_true);
        let mut x = vec![0.0; 6];
        let stats = conjugate_gradient(&a, &b, &mut x, None, &SolverOptions::default()).unwrap();
        assert!(stats.iterations <= 6);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn fixed_entries_are_held() {
        let a = path_matrix();
        let b = vec![0.0; 6];
        let mut x = vec![0.0; 6];
        x[0] = 2.0;
        x[5] = -1.0;
        let mut fixed = vec![false; 6];
        fixed[0] = true;
        fixed[5] = true;
        conjugate_gradient(&a, &b, &mut x, Some(&fixed), &SolverOptions::default()).unwrap();
        assert_eq!((x[0], x[5]), (2.0, -1.0));
        let r = a.apply(&x);
        for i in 1..5 {
            assert!(r[i].abs() < 1e-9);
        }
    }

    #[test]
    fn indefinite_matrix_detected() {
        let mut a = path_matrix();
        a.add_diagonal(&[-3.0; 6]);
        let b = vec![1.0; 6];
        let mut x = vec![0.0; 6];
        let r = conjugate_gradient(&a, &b, &mut x, None, &SolverOptions::default());
        assert!(matches!(r, Err(Error::Indefinite { .. })));
    }

    #[test]
    fn iteration_cap_reported() {
        let a = path_matrix();
        let b: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let mut x = vec![0.0; 6];
        let opts = SolverOptions {
            rel_tol: 1e-300,
            max_iter_factor: 1,
        };
        match conjugate_gradient(&a, &b, &mut x, None, &opts) {
            Err(Error::NotConverged { iterations, .. }) => assert_eq!(iterations, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn symmetry_and_row_sums() {
        let a = path_matrix();
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(a.row_sums(), vec![1.0; 6]);
        let c = a.linear_combination(2.0, &a, -1.0);
        assert_eq!(c.values(), a.values());
    }
}
