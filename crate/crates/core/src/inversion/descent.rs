use super::fd::fd_gradient_regions;
use super::metrics::{flux_error_norm, k_l2_error};
use super::{ConvergenceHistory, HistoryRecord, Problem};
use crate::adjoint::{evaluate, evaluate_cost};
use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, boundary_normal_flux, solve_dirichlet, BoundaryFlux, ConductivityField};
use crate::regularization::{project_gradient, RegionMap, Smoothing};
use crate::scalar::Real;
use crate::sparse::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMethod<T> {
    Adjoint,
    /// Central differences per region with an additive step; needs a region
    /// map and costs `2 * regions * measurements` solves per gradient.
    FiniteDifference { step: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig<T> {
    /// Initial step length.
    pub alpha: T,
    pub max_iters: usize,
    /// Applied to the element gradient density; ignored for region
    /// parameterizations.
    pub smoothing: Smoothing<T>,
    pub k_min: T,
    pub k0: T,
    /// Stop once the cost falls to `cost_tol` times its initial value.
    pub cost_tol: T,
    /// Stop once the largest relative change of any design value in one
    /// step is below this.
    pub param_tol: T,
    /// Halve the step until the cost decreases, up to `max_halvings` times.
    pub backtracking: bool,
    pub max_halvings: usize,
    /// Step multiplier after an accepted step (1 keeps it fixed).
    pub growth: T,
    pub gradient: GradientMethod<T>,
    pub solver: SolverOptions<T>,
}

impl<T: Real> Default for DescentConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            max_iters: 50,
            smoothing: Smoothing::default_pseudo_laplacian(),
            k_min: T::lit(1e-3),
            k0: T::one(),
            cost_tol: T::lit(1e-12),
            param_tol: T::lit(1e-7),
            backtracking: true,
            max_halvings: 30,
            growth: T::lit(2.0),
            gradient: GradientMethod::Adjoint,
            solver: SolverOptions::default(),
        }
    }
}

impl<T: Real> DescentConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) {
            return Err(Error::invalid("step length must be positive"));
        }
        if !(self.k_min > T::zero()) {
            return Err(Error::invalid("k_min must be positive"));
        }
        if !(self.k0 >= self.k_min) {
            return Err(Error::invalid("k0 must be at least k_min"));
        }
        if !(self.param_tol > T::zero()) {
            return Err(Error::invalid("relative parameter tolerance must be positive"));
        }
        if !(self.cost_tol >= T::zero()) {
            return Err(Error::invalid("cost tolerance must be non-negative"));
        }
        if !(self.growth >= T::one()) {
            return Err(Error::invalid("step growth factor must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    CostTolerance,
    ParameterChange,
    /// No decrease found after the allowed step halvings.
    LineSearch,
    ZeroGradient,
}

#[derive(Debug, Clone)]
pub struct DescentResult<T> {
    pub conductivity: ConductivityField<T>,
    pub history: ConvergenceHistory,
    pub stop: StopReason,
    /// Element values raised to `k_min` over the whole run.
    pub clamped: usize,
}

struct State<T> {
    cost: T,
    fluxes: Vec<BoundaryFlux<T>>,
    /// Descent direction as an element density.
    direction: Vec<T>,
}

/// Steepest descent `k <- max(k - alpha d, k_min)` where `d` is the
/// (smoothed or region-projected) gradient density.
///
/// With `regions` the conductivity stays constant on each region and the
/// region gradient is used; otherwise every element is a design value.
/// `observer` sees every accepted iterate.
pub fn run_descent<T: Real>(
    problem: &Problem<'_, T>,
    config: &DescentConfig<T>,
    regions: Option<&RegionMap<T>>,
    k_target: Option<&ConductivityField<T>>,
    mut observer: impl FnMut(usize, &ConductivityField<T>),
) -> Result<DescentResult<T>> {
    config.validate()?;
    if let GradientMethod::FiniteDifference { .. } = config.gradient {
        if regions.is_none() {
            return Err(Error::invalid("finite-difference descent needs a region map"));
        }
    }
    let n = problem.mesh.element_count();
    let mut history = ConvergenceHistory::default();
    let mut k = ConductivityField::uniform(n, config.k0)?;
    let mut iteration = 0;
    let wrap = |iteration: usize, history: &ConvergenceHistory, e: Error| Error::Descent {
        iteration,
        history: Box::new(history.clone()),
        source: Box::new(e),
    };

    let record = |iter: usize, state: &State<T>, k: &ConductivityField<T>, alpha: T| -> Result<HistoryRecord> {
        let flux_error = flux_error_norm(problem.mesh, &state.fluxes, problem.measurements)?;
        let k_err = match k_target {
            Some(t) => Some(k_l2_error(k, t, problem.geom)?.to_f64_lossy()),
            None => None,
        };
        Ok(HistoryRecord {
            iter,
            cost: state.cost.to_f64_lossy(),
            flux_error: flux_error.to_f64_lossy(),
            k_l2_error: k_err,
            alpha: alpha.to_f64_lossy(),
        })
    };

    let mut state = evaluate_state(problem, config, regions, &k).map_err(|e| wrap(0, &history, e))?;
    history.push(record(0, &state, &k, T::zero()).map_err(|e| wrap(0, &history, e))?);
    observer(0, &k);
    let initial_cost = state.cost;
    let mut alpha = config.alpha;
    let mut clamped = 0;

    let stop = loop {
        if state.cost <= config.cost_tol * initial_cost {
            break StopReason::CostTolerance;
        }
        if state.direction.iter().all(|&d| d == T::zero()) {
            break StopReason::ZeroGradient;
        }
        if iteration >= config.max_iters {
            break StopReason::MaxIterations;
        }
        iteration += 1;
        let mut halvings = 0;
        let accepted = loop {
            let mut trial_clamped = 0;
            let values: Vec<T> = k
                .values()
                .iter()
                .zip(&state.direction)
                .map(|(&kv, &d)| {
                    let v = kv - alpha * d;
                    if v < config.k_min {
                        trial_clamped += 1;
                        config.k_min
                    } else {
                        v
                    }
                })
                .collect();
            let trial_k = ConductivityField::new(values).map_err(|e| wrap(iteration, &history, e))?;
            let trial = evaluate_state(problem, config, regions, &trial_k).map_err(|e| wrap(iteration, &history, e))?;
            if !config.backtracking || trial.cost < state.cost {
                clamped += trial_clamped;
                break Some((trial_k, trial));
            }
            halvings += 1;
            if halvings > config.max_halvings {
                break None;
            }
            alpha /= T::lit(2.0);
        };
        let Some((new_k, new_state)) = accepted else {
            break StopReason::LineSearch;
        };
        let change = k
            .values()
            .iter()
            .zip(new_k.values())
            .fold(T::zero(), |m, (&a, &b)| m.max((b - a).abs() / a));
        k = new_k;
        state = new_state;
        history.push(record(iteration, &state, &k, alpha).map_err(|e| wrap(iteration, &history, e))?);
        observer(iteration, &k);
        alpha *= config.growth;
        if change < config.param_tol {
            break StopReason::ParameterChange;
        }
    };

    Ok(DescentResult {
        conductivity: k,
        history,
        stop,
        clamped,
    })
}

fn evaluate_state<T: Real>(
    problem: &Problem<'_, T>,
    config: &DescentConfig<T>,
    regions: Option<&RegionMap<T>>,
    k: &ConductivityField<T>,
) -> Result<State<T>> {
    match config.gradient {
        GradientMethod::Adjoint => {
            let ev = evaluate(
                problem.mesh,
                problem.geom,
                k,
                problem.boundary,
                problem.measurements,
                &config.solver,
            )?;
            let direction = match regions {
                Some(r) => r.expand(&project_gradient(&ev.gradient.values, r)?),
                None => config
                    .smoothing
                    .apply(problem.mesh, problem.geom, &ev.gradient.density(problem.geom), &config.solver)?,
            };
            Ok(State {
                cost: ev.cost,
                fluxes: ev.fluxes,
                direction,
            })
        }
        GradientMethod::FiniteDifference { step } => {
            let regions = regions.ok_or_else(|| Error::invalid("finite-difference descent needs a region map"))?;
            let (cost, fluxes) = forward_fluxes(problem, k, &config.solver)?;
            let grad = fd_gradient_regions(problem, k, regions, step, &config.solver)?;
            Ok(State {
                cost,
                fluxes,
                direction: regions.expand(&grad.density),
            })
        }
    }
}

/// Total misfit and computed fluxes, forward solves only.
pub(crate) fn forward_fluxes<T: Real>(
    problem: &Problem<'_, T>,
    k: &ConductivityField<T>,
    opts: &SolverOptions<T>,
) -> Result<(T, Vec<BoundaryFlux<T>>)> {
    let a = assemble_stiffness(problem.mesh, problem.geom, k)?;
    let mut cost = T::zero();
    let mut fluxes = Vec::with_capacity(problem.measurements.len());
    for m in problem.measurements {
        let (c, f) = (|| -> Result<_> {
            let (u, _) = solve_dirichlet(problem.mesh, &a, &m.dirichlet, opts)?;
            let f = boundary_normal_flux(problem.mesh, problem.geom, k, problem.boundary, &u)?;
            Ok((evaluate_cost(problem.mesh, problem.boundary, &f, m)?, f))
        })()
        .map_err(|e| e.for_measurement(m.id))?;
        cost += c;
        fluxes.push(f);
    }
    Ok((cost, fluxes))
}
