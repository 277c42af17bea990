use super::descent::forward_fluxes;
use super::metrics::{flux_error_norm, k_l2_error};
use super::target::{build_target, TargetSpec};
use super::{ConvergenceHistory, HistoryRecord, Problem, StopReason};
use crate::error::{Error, Result};
use crate::fem::{BoundaryFlux, ConductivityField};
use crate::scalar::Real;
use crate::sparse::SolverOptions;

/// Design vector of the disk model: centre, radius and inner conductivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskParameters<T> {
    pub x0: T,
    pub y0: T,
    pub r0: T,
    pub k_disk: T,
}

impl<T: Real> DiskParameters<T> {
    pub fn to_array(self) -> [T; 4] {
        [self.x0, self.y0, self.r0, self.k_disk]
    }

    pub fn from_array(p: [T; 4]) -> Self {
        Self {
            x0: p[0],
            y0: p[1],
            r0: p[2],
            k_disk: p[3],
        }
    }

    pub fn target(&self, k_exte: T, blend: T) -> TargetSpec<T> {
        TargetSpec::Disk {
            center: [self.x0, self.y0],
            radius: self.r0,
            k_disk: self.k_disk,
            k_exte,
            blend,
        }
    }
}

/// How the four finite-difference sensitivities are turned into a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParametricDirection {
    /// Negative gradient of the misfit, from central differences of the cost.
    Steepest,
    /// Gradient preconditioned by `J^T J + mu diag(J^T J)`, where `J` is the
    /// central-difference Jacobian of the weighted flux residual. Costs the
    /// same eight forward solves per measurement and iteration as the plain
    /// gradient.
    GaussNewton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricConfig<T> {
    /// Background conductivity, held fixed.
    pub k_exte: T,
    /// Rim ramp width in element sizes (see [`TargetSpec::Disk`]).
    pub blend: T,
    pub direction: ParametricDirection,
    /// Initial step length; Gauss-Newton restarts every line search from it.
    pub alpha: T,
    /// Levenberg damping for [`ParametricDirection::GaussNewton`].
    pub damping: T,
    pub max_iters: usize,
    /// Relative design parameter range: stop once no parameter moves by more
    /// than this fraction of its value.
    pub eps_r: T,
    /// Finite-difference step relative to `max(|p|, 0.1)`.
    pub fd_step: T,
    pub max_halvings: usize,
    /// Step multiplier after an accepted steepest-descent step.
    pub growth: T,
    pub r_min: T,
    pub k_min: T,
    pub solver: SolverOptions<T>,
}

impl<T: Real> Default for ParametricConfig<T> {
    fn default() -> Self {
        Self {
            k_exte: T::one(),
            blend: T::one(),
            direction: ParametricDirection::GaussNewton,
            alpha: T::one(),
            damping: T::lit(1e-6),
            max_iters: 100,
            eps_r: T::lit(1e-3),
            fd_step: T::lit(1e-4),
            max_halvings: 30,
            growth: T::lit(2.0),
            r_min: T::lit(1e-2),
            k_min: T::lit(1e-3),
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParametricResult<T> {
    pub parameters: DiskParameters<T>,
    pub conductivity: ConductivityField<T>,
    pub history: ConvergenceHistory,
    pub stop: StopReason,
    /// Parameter components pulled back into bounds over the run.
    pub clamped: usize,
    pub forward_solves: usize,
}

/// Weighted flux residual `(f - f_m) sqrt(|face|)` over all measured faces,
/// so that the misfit is half its squared norm.
fn residual<T: Real>(problem: &Problem<'_, T>, fluxes: &[BoundaryFlux<T>]) -> Vec<T> {
    let faces = problem.mesh.boundary_faces();
    let mut out = Vec::new();
    for (f, m) in fluxes.iter().zip(problem.measurements) {
        for (i, face) in faces.iter().enumerate() {
            if problem.boundary.is_active(i) {
                out.push((f.values[i] - m.target_flux.values[i]) * face.measure.sqrt());
            }
        }
    }
    out
}

/// Solves the symmetric positive definite 4x4 system by Cholesky
/// factorization; `None` when it is not numerically definite.
fn solve_spd4<T: Real>(a: [[T; 4]; 4], b: [T; 4]) -> Option<[T; 4]> {
    let mut l = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [T::zero(); 4];
    for i in 0..4 {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [T::zero(); 4];
    for i in (0..4).rev() {
        let mut s = y[i];
        for k in i + 1..4 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Descent on the four disk parameters using finite-difference
/// sensitivities and a backtracking line search (halve on increase).
pub fn run_parametric_disk<T: Real>(
    problem: &Problem<'_, T>,
    initial: DiskParameters<T>,
    config: &ParametricConfig<T>,
    k_target: Option<&ConductivityField<T>>,
) -> Result<ParametricResult<T>> {
    if !(initial.r0 > T::zero() && initial.k_disk > T::zero()) {
        return Err(Error::invalid("initial radius and disk conductivity must be positive"));
    }
    if !(config.eps_r > T::zero() && config.alpha > T::zero() && config.fd_step > T::zero()) {
        return Err(Error::invalid("eps_r, alpha and fd_step must be positive"));
    }
    if !(config.damping >= T::zero() && config.growth >= T::one()) {
        return Err(Error::invalid("damping must be non-negative and growth at least 1"));
    }
    let (lo, hi) = problem.mesh.bounds();
    let lower = [lo[0], lo[1], config.r_min, config.k_min];
    let upper = [hi[0], hi[1], T::infinity(), T::infinity()];
    let mut clamped = 0;
    let mut clamp = |p: [T; 4]| {
        let mut q = p;
        for i in 0..4 {
            let c = q[i].max(lower[i]).min(upper[i]);
            if c != q[i] {
                clamped += 1;
            }
            q[i] = c;
        }
        q
    };

    let m = problem.measurements.len();
    let mut solves = 0;
    let mut eval = |p: [T; 4]| -> Result<(T, Vec<BoundaryFlux<T>>, ConductivityField<T>)> {
        let spec = DiskParameters::from_array(p).target(config.k_exte, config.blend);
        let k = build_target(problem.mesh, problem.geom, &spec)?;
        let (c, f) = forward_fluxes(problem, &k, &config.solver)?;
        solves += m;
        Ok((c, f, k))
    };

    let record = |iter: usize, cost: T, f: &[BoundaryFlux<T>], k: &ConductivityField<T>, alpha: T| -> Result<HistoryRecord> {
        Ok(HistoryRecord {
            iter,
            cost: cost.to_f64_lossy(),
            flux_error: flux_error_norm(problem.mesh, f, problem.measurements)?.to_f64_lossy(),
            k_l2_error: match k_target {
                Some(t) => Some(k_l2_error(k, t, problem.geom)?.to_f64_lossy()),
                None => None,
            },
            alpha: alpha.to_f64_lossy(),
        })
    };

    let mut p = clamp(initial.to_array());
    let (mut cost, mut fluxes, mut k) = eval(p)?;
    let mut history = ConvergenceHistory::default();
    history.push(record(0, cost, &fluxes, &k, T::zero())?);
    let initial_cost = cost;
    let mut alpha = config.alpha;
    let tiny = T::epsilon() * T::lit(1e3);
    let two = T::lit(2.0);

    let mut iteration = 0;
    let stop = loop {
        if cost <= tiny * tiny * initial_cost || cost == T::zero() {
            break StopReason::CostTolerance;
        }
        if iteration >= config.max_iters {
            break StopReason::MaxIterations;
        }
        iteration += 1;
        let r0 = residual(problem, &fluxes);
        let mut grad = [T::zero(); 4];
        let mut jac: Vec<Vec<T>> = Vec::with_capacity(4);
        for i in 0..4 {
            let h = config.fd_step * p[i].abs().max(T::lit(0.1));
            let mut pp = p;
            let mut pm = p;
            pp[i] += h;
            pm[i] -= h;
            let (cp, fp, _) = eval(pp)?;
            let (cm, fm, _) = eval(pm)?;
            grad[i] = (cp - cm) / (h + h);
            if config.direction == ParametricDirection::GaussNewton {
                let (rp, rm) = (residual(problem, &fp), residual(problem, &fm));
                jac.push(rp.iter().zip(&rm).map(|(&a, &b)| (a - b) / (h + h)).collect());
            }
        }
        if grad.iter().all(|&g| g == T::zero()) {
            break StopReason::ZeroGradient;
        }
        let direction = match config.direction {
            ParametricDirection::Steepest => grad,
            ParametricDirection::GaussNewton => {
                let mut jtj = [[T::zero(); 4]; 4];
                let mut jtr = [T::zero(); 4];
                for i in 0..4 {
                    jtr[i] = jac[i].iter().zip(&r0).map(|(&a, &b)| a * b).sum();
                    for j in 0..4 {
                        jtj[i][j] = jac[i].iter().zip(&jac[j]).map(|(&a, &b)| a * b).sum();
                    }
                }
                for (i, row) in jtj.iter_mut().enumerate() {
                    row[i] += config.damping * row[i];
                }
                alpha = config.alpha;
                solve_spd4(jtj, jtr).unwrap_or(grad)
            }
        };
        let mut halvings = 0;
        let accepted = loop {
            let mut trial = p;
            for i in 0..4 {
                trial[i] -= alpha * direction[i];
            }
            let trial = clamp(trial);
            let (c, f, kt) = eval(trial)?;
            if c < cost {
                break Some((trial, c, f, kt));
            }
            halvings += 1;
            if halvings > config.max_halvings {
                break None;
            }
            alpha /= two;
        };
        let Some((trial, c, f, kt)) = accepted else {
            break StopReason::LineSearch;
        };
        let change = (0..4).fold(T::zero(), |acc, i| acc.max((trial[i] - p[i]).abs() / p[i].abs().max(tiny)));
        p = trial;
        cost = c;
        fluxes = f;
        k = kt;
        history.push(record(iteration, cost, &fluxes, &k, alpha)?);
        if config.direction == ParametricDirection::Steepest {
            alpha *= config.growth;
        }
        if change < config.eps_r {
            break StopReason::ParameterChange;
        }
    };

    Ok(ParametricResult {
        parameters: DiskParameters::from_array(p),
        conductivity: k,
        history,
        stop,
        clamped,
        forward_solves: solves,
    })
}
