use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use calderon_core::adjoint::evaluate;
use calderon_core::analytic1d::{boundary_data, nonuniqueness_family, reference_profiles, resistance};
use calderon_core::fem::{solve_forward_with, ConductivityField};
use calderon_core::gradcheck::{gradient_check, sample_elements, write_gradcheck_csv};
use calderon_core::inversion::{
    run_descent, run_parametric_disk, ConvergenceHistory, DiskParameters, ParametricConfig, TargetSpec,
};
use calderon_core::mesh::{generate_box_mesh, write_mesh};
use calderon_core::presets::{square_slab, three_region_2d, unit_cube};
use calderon_core::regularization::RegionMap;
use calderon_core::sparse::SolverOptions;
use calderon_core::vtk::{write_vtk, VtkFields};
use calderon_core::{Error, Setup};

use crate::config::{Dofs, ExperimentConfig, Preset};
use crate::error::CliError;

/// Environment variable overriding the output directory of every command.
pub const OUT_DIR_ENV: &str = "CALDERON_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "calderon-out";

/// `--out-dir`, then the environment, then the config file, then the default.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = match (flag, std::env::var_os(OUT_DIR_ENV), config) {
        (Some(f), _, _) => f.to_path_buf(),
        (None, Some(env), _) if !env.is_empty() => PathBuf::from(env),
        (None, _, Some(c)) => c.to_path_buf(),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    };
    fs::create_dir_all(&dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(CliError::io(format!("creating {}", path.display())))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(CliError::io(format!("writing {}", path.display())))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{what}: cannot parse {v:?}")))
        })
        .collect()
}

pub fn cmd_mesh(bbox: &str, div: &str, output: &Path) -> Result<(), CliError> {
    let (lo, hi) = bbox
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("--box {bbox}: expected LO:HI, e.g. 0,0:1,1")))?;
    let lo: Vec<f64> = parse_list(lo, "--box")?;
    let hi: Vec<f64> = parse_list(hi, "--box")?;
    let div: Vec<usize> = parse_list(div, "--div")?;
    if lo.len() != div.len() || hi.len() != div.len() {
        return Err(CliError::Usage(format!(
            "--box has {} coordinates per corner but --div has {} entries",
            lo.len(),
            div.len()
        )));
    }
    let mesh = generate_box_mesh(&lo, &hi, &div)?;
    write_mesh(&mesh, output)?;
    println!(
        "wrote {}: {} nodes, {} elements, {} boundary faces",
        output.display(),
        mesh.node_count(),
        mesh.element_count(),
        mesh.boundary_faces().len()
    );
    Ok(())
}

pub fn build_setup(cfg: &ExperimentConfig, opts: &SolverOptions<f64>) -> Result<Setup, CliError> {
    let n = cfg.divisions;
    let setup = match cfg.preset {
        Preset::SquareConstant => square_slab(n, &TargetSpec::Constant(2.0), cfg.measurements, opts)?,
        Preset::SquareLinear => square_slab(n, &TargetSpec::linear_decreasing(), cfg.measurements, opts)?,
        Preset::SquareGaussian => square_slab(n, &TargetSpec::gaussian_bump(cfg.center.clone()), cfg.measurements, opts)?,
        // measurements come from the sharp disk; the parametric model blends its rim
        Preset::SquareDisk => square_slab(n, &TargetSpec::reference_disk(0.0), cfg.measurements, opts)?,
        Preset::CubeGaussian => {
            let mut s = unit_cube(n, &TargetSpec::gaussian_bump(cfg.center.clone()), opts)?;
            if cfg.measurements == 0 || cfg.measurements > 3 {
                return Err(CliError::Usage("the cube preset has 1 to 3 measurements".into()));
            }
            s.truncate_measurements(cfg.measurements);
            s
        }
        Preset::ThreeRegion2d => three_region_2d(n, opts)?,
        Preset::OnedDemo => return Err(CliError::Usage("oned-demo has no finite-element setup".into())),
    };
    Ok(setup)
}

fn region_map(cfg: &ExperimentConfig, setup: &Setup) -> Result<Option<RegionMap<f64>>, CliError> {
    let Dofs::Regions(total) = cfg.dofs else {
        return Ok(None);
    };
    // the slab and the strip domain are split in-plane only
    let axes = if cfg.preset == Preset::CubeGaussian { 3 } else { 2 };
    let side = (1..=total)
        .find(|s| s.pow(axes) >= total)
        .filter(|s| s.pow(axes) == total)
        .ok_or_else(|| CliError::Usage(format!("dofs {total} is not a perfect power {axes} lattice")))?;
    Ok(Some(RegionMap::lattice(&setup.mesh, &setup.geom, &vec![side; axes as usize])?))
}

fn write_history(history: &ConvergenceHistory, dir: &Path) -> Result<(), CliError> {
    let path = dir.join("history.csv");
    let mut w = create(&path)?;
    history
        .write_csv(&mut w)
        .map_err(CliError::io(format!("writing {}", path.display())))?;
    finish(w, &path)
}

fn write_manifest(cfg: &ExperimentConfig, dir: &Path, extra: &[(String, String)]) -> Result<(), CliError> {
    let path = dir.join("manifest.txt");
    let mut w = create(&path)?;
    let mut lines = vec![
        ("preset".to_string(), cfg.preset.name().to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("divisions".to_string(), cfg.divisions.to_string()),
        ("measurements".to_string(), cfg.measurements.to_string()),
        ("dofs".to_string(), format!("{:?}", cfg.dofs)),
    ];
    lines.extend_from_slice(extra);
    for (k, v) in lines {
        writeln!(w, "{k} = {v}").map_err(CliError::io("writing manifest"))?;
    }
    finish(w, &path)
}

fn write_flux_csv(setup: &Setup, computed: &[f64], target: &[f64], path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = |e| CliError::io(format!("writing {}", path.display()))(e);
    writeln!(w, "face_id,measure,flux,target_flux").map_err(io)?;
    for (i, face) in setup.mesh.boundary_faces().iter().enumerate() {
        if setup.boundary.is_active(i) {
            writeln!(w, "{i},{:e},{:e},{:e}", face.measure, computed[i], target[i]).map_err(io)?;
        }
    }
    finish(w, path)
}

pub fn cmd_forward(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let opts = SolverOptions::default();
    let setup = build_setup(cfg, &opts)?;
    for m in &setup.measurements {
        let (u, stats) = solve_forward_with(&setup.mesh, &setup.geom, &setup.target, &m.dirichlet, &opts)
            .map_err(|e| Error::Measurement {
                id: m.id,
                source: Box::new(e),
            })?;
        let path = dir.join(format!("forward_m{}.vtk", m.id));
        write_vtk(
            &path,
            &setup.mesh,
            &format!("{} measurement {}", cfg.preset.name(), m.id),
            &VtkFields::new().point("u", &u.values).cell("k", setup.target.values()),
        )?;
        write_flux_csv(
            &setup,
            &m.target_flux.values,
            &m.target_flux.values,
            &dir.join(format!("flux_m{}.csv", m.id)),
        )?;
        println!(
            "measurement {}: {} CG iterations, relative residual {:.2e}",
            m.id, stats.iterations, stats.relative_residual
        );
    }
    write_manifest(cfg, dir, &[])?;
    Ok(())
}

pub fn cmd_gradcheck(cfg: &ExperimentConfig, dir: &Path, corrupt: bool) -> Result<(), CliError> {
    let opts = SolverOptions::tight();
    let setup = build_setup(cfg, &opts)?;
    let problem = setup.problem();
    let n = setup.mesh.element_count();
    let k = ConductivityField::uniform(n, cfg.descent.k0)?;
    let elements = sample_elements(n, cfg.gradcheck_samples.min(n), cfg.seed)?;
    let rows = gradient_check(&problem, &k, &elements, cfg.gradcheck_rel_step, &opts, |g| {
        if corrupt {
            for v in g.iter_mut() {
                *v *= 1.1;
            }
        }
    })?;
    let path = dir.join("gradcheck.csv");
    let mut w = create(&path)?;
    write_gradcheck_csv(&mut w, &rows).map_err(CliError::io(format!("writing {}", path.display())))?;
    finish(w, &path)?;
    write_manifest(cfg, dir, &[("corrupt_gradient".into(), corrupt.to_string())])?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    println!("{} elements checked, worst relative error {worst:.3e}", rows.len());
    if worst > cfg.gradcheck_tolerance {
        return Err(CliError::CheckFailed(format!(
            "worst relative error {worst:.3e} exceeds {:.1e}",
            cfg.gradcheck_tolerance
        )));
    }
    Ok(())
}

pub fn cmd_invert(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    match cfg.preset {
        Preset::OnedDemo => return cmd_oned(cfg, dir),
        Preset::SquareDisk => return invert_disk(cfg, dir),
        _ => {}
    }
    let setup = build_setup(cfg, &cfg.descent.solver)?;
    let regions = region_map(cfg, &setup)?;
    let problem = setup.problem();
    let mut snapshot_err = None;
    let result = run_descent(&problem, &cfg.descent, regions.as_ref(), Some(&setup.target), |it, k| {
        if cfg.vtk_every > 0 && it % cfg.vtk_every == 0 && snapshot_err.is_none() {
            let path = dir.join(format!("k_{it:04}.vtk"));
            if let Err(e) = write_vtk(&path, &setup.mesh, &format!("k at iteration {it}"), &VtkFields::new().cell("k", k.values())) {
                snapshot_err = Some(e);
            }
        }
    });
    let result = match result {
        Ok(r) => r,
        Err(Error::Descent { iteration, history, source }) => {
            write_history(&history, dir)?;
            return Err(Error::Descent { iteration, history, source }.into());
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(e) = snapshot_err {
        return Err(e.into());
    }
    write_history(&result.history, dir)?;

    let ev = evaluate(
        &setup.mesh,
        &setup.geom,
        &result.conductivity,
        &setup.boundary,
        &setup.measurements,
        &cfg.descent.solver,
    )?;
    let initial = vec![cfg.descent.k0; setup.mesh.element_count()];
    let density = ev.gradient.density(&setup.geom);
    let names: Vec<String> = (0..setup.measurements.len()).map(|i| format!("u_m{i}")).collect();
    let mut fields = VtkFields::new()
        .cell("k_initial", &initial)
        .cell("k_final", result.conductivity.values())
        .cell("k_target", setup.target.values())
        .cell("gradient", &density);
    for (name, u) in names.iter().zip(&ev.states) {
        fields = fields.point(name, &u.values);
    }
    write_vtk(dir.join("fields.vtk"), &setup.mesh, cfg.preset.name(), &fields)?;
    for (m, f) in setup.measurements.iter().zip(&ev.fluxes) {
        write_flux_csv(&setup, &f.values, &m.target_flux.values, &dir.join(format!("flux_m{}.csv", m.id)))?;
    }
    write_manifest(cfg, dir, &[("stop".into(), format!("{:?}", result.stop)), ("clamped".into(), result.clamped.to_string())])?;
    let last = result.history.last().expect("history has the initial record");
    println!(
        "{}: {} iterations ({:?}), cost {:.3e}, flux error {:.3e}, k L2 error {:.3e}",
        cfg.preset.name(),
        last.iter,
        result.stop,
        last.cost,
        last.flux_error,
        last.k_l2_error.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn invert_disk(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let setup = build_setup(cfg, &cfg.descent.solver)?;
    let problem = setup.problem();
    let pc = ParametricConfig {
        blend: cfg.disk_blend,
        eps_r: cfg.disk_eps_r,
        direction: cfg.disk_direction,
        max_iters: cfg.disk_max_iters,
        solver: cfg.descent.solver,
        ..ParametricConfig::default()
    };
    let p = cfg.disk_initial;
    let init = DiskParameters {
        x0: p[0],
        y0: p[1],
        r0: p[2],
        k_disk: p[3],
    };
    let initial_k = calderon_core::inversion::build_target(&setup.mesh, &setup.geom, &init.target(pc.k_exte, pc.blend))?;
    let r = run_parametric_disk(&problem, init, &pc, Some(&setup.target))?;
    write_history(&r.history, dir)?;
    write_vtk(
        dir.join("fields.vtk"),
        &setup.mesh,
        "square-disk",
        &VtkFields::new()
            .cell("k_initial", initial_k.values())
            .cell("k_final", r.conductivity.values())
            .cell("k_target", setup.target.values()),
    )?;
    let q = r.parameters;
    let path = dir.join("disk_parameters.csv");
    let mut w = create(&path)?;
    writeln!(w, "x0,y0,r0,k_disk\n{},{},{},{}", q.x0, q.y0, q.r0, q.k_disk).map_err(CliError::io("writing disk parameters"))?;
    finish(w, &path)?;
    write_manifest(
        cfg,
        dir,
        &[
            ("stop".into(), format!("{:?}", r.stop)),
            ("clamped".into(), r.clamped.to_string()),
            ("forward_solves".into(), r.forward_solves.to_string()),
        ],
    )?;
    let last = r.history.last().expect("history has the initial record");
    println!(
        "square-disk: centre ({:.4}, {:.4}), r0 {:.4}, k_disk {:.4} after {} iterations ({:?}); cost ratio {:.3e}, flux error {:.3e}, k L2 error {:.3e}",
        q.x0,
        q.y0,
        q.r0,
        q.k_disk,
        last.iter,
        r.stop,
        last.cost / r.history.first().expect("initial").cost,
        last.flux_error,
        last.k_l2_error.unwrap_or(f64::NAN)
    );
    if q.r0 > 0.25 && q.k_disk < 5.0 {
        println!("square-disk: radius overestimated with lower disk conductivity");
    } else if q.r0 < 0.25 && q.k_disk > 5.0 {
        println!("square-disk: radius underestimated with higher disk conductivity");
    }
    Ok(())
}

/// CSV of the three reference profiles plus one random member of the same
/// family, with the boundary data they share (u(0) = 1, u(1) = 0).
pub fn cmd_oned(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let mut profiles = reference_profiles::<f64>()
        .into_iter()
        .map(|(n, p)| (n.to_string(), p))
        .collect::<Vec<_>>();
    profiles.push((format!("random-seed{}", cfg.seed), nonuniqueness_family(1.0, 4, cfg.seed)?));
    let path = dir.join("oned_demo.csv");
    let mut w = create(&path)?;
    let io = |e| CliError::io(format!("writing {}", path.display()))(e);
    writeln!(w, "profile,interval,x_left,x_right,k,u_left,u_right,flux,resistance").map_err(io)?;
    for (name, p) in &profiles {
        let d = boundary_data(p, 1.0, 0.0);
        let r = resistance(p);
        for (i, k) in p.values().iter().enumerate() {
            writeln!(
                w,
                "{name},{i},{},{},{},{},{},{},{}",
                p.breakpoints()[i],
                p.breakpoints()[i + 1],
                k,
                d.nodal[i],
                d.nodal[i + 1],
                d.flux,
                r
            )
            .map_err(io)?;
        }
        println!("profile {name}: k = {:?}, flux {:.12}, resistance {:.12}", p.values(), d.flux, r);
    }
    finish(w, &path)?;
    write_manifest(cfg, dir, &[])
}
