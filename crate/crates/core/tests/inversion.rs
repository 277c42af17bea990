//! End-to-end behaviour of the descent drivers on small setups.

use calderon_core::fem::ConductivityField;
use calderon_core::inversion::{
    build_target, run_descent, run_parametric_disk, DescentConfig, DiskParameters, GradientMethod, ParametricConfig,
    ParametricDirection, StopReason, TargetSpec,
};
use calderon_core::presets::{square_slab, three_region_2d};
use calderon_core::regularization::{RegionMap, Smoothing};
use calderon_core::sparse::SolverOptions;
use calderon_core::Error;
use proptest::prelude::*;

fn opts() -> SolverOptions<f64> {
    SolverOptions::default()
}

#[test]
fn exact_start_is_a_fixed_point() {
    let setup = square_slab(4, &TargetSpec::Constant(2.0), 2, &opts()).unwrap();
    let cfg = DescentConfig {
        k0: 2.0,
        ..DescentConfig::default()
    };
    let r = run_descent(&setup.problem(), &cfg, None, Some(&setup.target), |_, _| {}).unwrap();
    assert!(r.history.first().unwrap().cost < 1e-18);
    assert!(r.history.len() <= 2, "{:?}", r.stop);
    assert!(r.conductivity.values().iter().all(|&v| (v - 2.0).abs() < 1e-6));
}

#[test]
fn history_records_start_and_every_iteration() {
    let setup = square_slab(4, &TargetSpec::Constant(2.0), 2, &opts()).unwrap();
    let cfg = DescentConfig {
        max_iters: 5,
        cost_tol: 0.0,
        ..DescentConfig::default()
    };
    let r = run_descent(&setup.problem(), &cfg, None, Some(&setup.target), |_, _| {}).unwrap();
    assert_eq!(r.history.len(), 6);
    assert_eq!(r.stop, StopReason::MaxIterations);
    let mut csv = Vec::new();
    r.history.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("iter,cost,flux_error,k_l2_error,alpha\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn observer_sees_each_accepted_iterate() {
    let setup = square_slab(4, &TargetSpec::Constant(2.0), 1, &opts()).unwrap();
    let cfg = DescentConfig {
        max_iters: 4,
        cost_tol: 0.0,
        ..DescentConfig::default()
    };
    let mut seen = Vec::new();
    run_descent(&setup.problem(), &cfg, None, None, |it, _| seen.push(it)).unwrap();
    assert_eq!(seen.last(), Some(&4));
}

#[test]
fn region_descent_stays_piecewise_constant() {
    let setup = square_slab(6, &TargetSpec::gaussian_bump(vec![0.5, 0.5]), 2, &opts()).unwrap();
    let regions = RegionMap::lattice(&setup.mesh, &setup.geom, &[3, 3]).unwrap();
    let cfg = DescentConfig {
        max_iters: 10,
        ..DescentConfig::default()
    };
    let r = run_descent(&setup.problem(), &cfg, Some(&regions), Some(&setup.target), |_, _| {}).unwrap();
    let k = r.conductivity.values();
    for e in 0..k.len() {
        let first = regions.assignment().iter().position(|&a| a == regions.region_of(e)).unwrap();
        assert_eq!(k[e], k[first]);
    }
    assert!(r.history.last().unwrap().cost < r.history.first().unwrap().cost);
}

#[test]
fn fd_and_adjoint_region_descent_agree() {
    let setup = square_slab(4, &TargetSpec::linear_decreasing(), 2, &opts()).unwrap();
    let regions = RegionMap::lattice(&setup.mesh, &setup.geom, &[2, 2]).unwrap();
    let base = DescentConfig {
        max_iters: 5,
        solver: SolverOptions::tight(),
        ..DescentConfig::default()
    };
    let fd_cfg = DescentConfig {
        gradient: GradientMethod::FiniteDifference { step: 1e-5 },
        ..base.clone()
    };
    let a = run_descent(&setup.problem(), &base, Some(&regions), None, |_, _| {}).unwrap();
    let f = run_descent(&setup.problem(), &fd_cfg, Some(&regions), None, |_, _| {}).unwrap();
    for (x, y) in a.conductivity.values().iter().zip(f.conductivity.values()) {
        assert!((x - y).abs() < 1e-6 * x.abs(), "{x} vs {y}");
    }
}

#[test]
fn fd_descent_needs_regions() {
    let setup = square_slab(3, &TargetSpec::Constant(2.0), 1, &opts()).unwrap();
    let cfg = DescentConfig {
        gradient: GradientMethod::FiniteDifference { step: 1e-4 },
        ..DescentConfig::default()
    };
    assert!(matches!(
        run_descent(&setup.problem(), &cfg, None, None, |_, _| {}),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn solver_failure_reports_iteration_and_history() {
    let setup = square_slab(4, &TargetSpec::Constant(2.0), 1, &opts()).unwrap();
    let cfg = DescentConfig {
        solver: SolverOptions {
            rel_tol: 0.0,
            max_iter_factor: 1,
        },
        ..DescentConfig::default()
    };
    match run_descent(&setup.problem(), &cfg, None, None, |_, _| {}) {
        Err(Error::Descent { iteration, history, source }) => {
            assert_eq!(iteration, 0);
            assert!(history.is_empty());
            assert!(matches!(*source, Error::NotConverged { .. } | Error::Measurement { .. }));
        }
        other => panic!("expected a descent error, got {other:?}"),
    }
}

#[test]
fn spea_on_conductivity_option_runs() {
    let setup = square_slab(4, &TargetSpec::linear_decreasing(), 2, &opts()).unwrap();
    let cfg = DescentConfig {
        max_iters: 10,
        smoothing: Smoothing::Spea { passes: 1 },
        ..DescentConfig::default()
    };
    let r = run_descent(&setup.problem(), &cfg, None, Some(&setup.target), |_, _| {}).unwrap();
    assert!(r.history.last().unwrap().cost < 0.5 * r.history.first().unwrap().cost);
}

// A uniform guess already reproduces the boundary flux of the strip
// conductivity to within a percent: the potential is nearly flat in the
// high-conductivity strip, so the data hardly constrain it.
#[test]
fn three_region_strip_is_nearly_invisible() {
    let setup = three_region_2d(4, &opts()).unwrap();
    assert_eq!(setup.measurements.len(), 1);
    let cfg = DescentConfig {
        max_iters: 30,
        ..DescentConfig::default()
    };
    let r = run_descent(&setup.problem(), &cfg, None, Some(&setup.target), |_, _| {}).unwrap();
    let (a, b) = (r.history.first().unwrap(), r.history.last().unwrap());
    assert!(a.flux_error < 0.01, "{a:?}");
    assert!(a.k_l2_error.unwrap() > 0.5);
    assert!(b.cost < a.cost);
    assert!(b.k_l2_error.unwrap() > 0.5, "{b:?}");
}

#[test]
fn parametric_disk_recovers_a_blended_target() {
    let truth = DiskParameters {
        x0: 0.5,
        y0: 0.5,
        r0: 0.25,
        k_disk: 10.0,
    };
    let setup = square_slab(12, &truth.target(1.0, 1.0), 2, &opts()).unwrap();
    let init = DiskParameters {
        x0: 0.45,
        y0: 0.55,
        r0: 0.2,
        k_disk: 6.0,
    };
    let r = run_parametric_disk(&setup.problem(), init, &ParametricConfig::default(), Some(&setup.target)).unwrap();
    let p = r.parameters;
    assert!((p.x0 - 0.5).abs() < 1e-2 && (p.y0 - 0.5).abs() < 1e-2, "{p:?}");
    assert!((p.r0 - 0.25).abs() < 2e-2, "{p:?}");
    assert!(r.history.last().unwrap().cost < 1e-4 * r.history.first().unwrap().cost);
    assert_eq!(r.forward_solves % 2, 0);
}

#[test]
fn steepest_parametric_direction_decreases_cost() {
    let setup = square_slab(8, &TargetSpec::<f64>::reference_disk(0.0), 2, &opts()).unwrap();
    let cfg = ParametricConfig {
        direction: ParametricDirection::Steepest,
        max_iters: 10,
        ..ParametricConfig::default()
    };
    let init = DiskParameters::from_array([0.3, 0.3, 0.15, 3.0]);
    let r = run_parametric_disk(&setup.problem(), init, &cfg, None).unwrap();
    let costs: Vec<f64> = r.history.records.iter().map(|h| h.cost).collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    assert!(costs.last().unwrap() < &costs[0]);
}

#[test]
fn single_precision_tracks_double() {
    let s32 = square_slab::<f32>(4, &TargetSpec::Constant(2.0), 2, &SolverOptions::default()).unwrap();
    let s64 = square_slab::<f64>(4, &TargetSpec::Constant(2.0), 2, &opts()).unwrap();
    let a = run_descent(
        &s32.problem(),
        &DescentConfig::<f32> {
            max_iters: 20,
            ..DescentConfig::default()
        },
        None,
        Some(&s32.target),
        |_, _| {},
    )
    .unwrap();
    let b = run_descent(
        &s64.problem(),
        &DescentConfig::<f64> {
            max_iters: 20,
            ..DescentConfig::default()
        },
        None,
        Some(&s64.target),
        |_, _| {},
    )
    .unwrap();
    let (ea, eb) = (
        a.history.last().unwrap().k_l2_error.unwrap(),
        b.history.last().unwrap().k_l2_error.unwrap(),
    );
    assert!((ea - eb).abs() < 1e-4, "{ea} vs {eb}");
    let k = build_target(&s32.mesh, &s32.geom, &TargetSpec::Constant(2.0f32)).unwrap();
    assert_eq!(k, ConductivityField::uniform(s32.mesh.element_count(), 2.0f32).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cost_never_increases(k0 in 0.3f64..5.0, alpha in 0.05f64..20.0, linear in any::<bool>()) {
        let spec = if linear { TargetSpec::linear_decreasing() } else { TargetSpec::Constant(2.0) };
        let setup = square_slab(4, &spec, 2, &opts()).unwrap();
        let cfg = DescentConfig { k0, alpha, max_iters: 8, ..DescentConfig::default() };
        let r = run_descent(&setup.problem(), &cfg, None, None, |_, _| {}).unwrap();
        let costs: Vec<f64> = r.history.records.iter().map(|h| h.cost).collect();
        prop_assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
        prop_assert!(r.conductivity.values().iter().all(|&v| v >= cfg.k_min));
    }
}
