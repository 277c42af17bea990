use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn calderon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calderon"))
        .current_dir(dir)
        .env_remove("CALDERON_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn element_count(mesh_file: &Path) -> usize {
    calderon_core::mesh::read_mesh::<f64>(mesh_file).unwrap().element_count()
}

#[test]
fn mesh_slab_has_2400_tets() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["mesh", "--box", "0,0,0:1,1,0.05", "--div", "20,20,1", "-o", "slab.mesh"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(element_count(&tmp.path().join("slab.mesh")), 2400);
}

#[test]
fn mesh_bar_has_four_segments() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["mesh", "--box", "0:1", "--div", "4", "-o", "bar.mesh"]);
    assert_eq!(code(&o), 0);
    assert_eq!(element_count(&tmp.path().join("bar.mesh")), 4);
}

#[test]
fn mesh_without_div_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["mesh", "--box", "0:1"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--div"));
}

#[test]
fn mismatched_box_and_div_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["mesh", "--box", "0,0:1,1", "--div", "4"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn gradcheck_passes_and_reports_each_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(
        tmp.path(),
        &["gradcheck", "--out-dir", "out", "--div", "6", "--set", "gradcheck.samples=12"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/gradcheck.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("element_id,adjoint_grad,fd_grad,rel_error"));
    let rows: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|&r| r <= 1e-4), "{rows:?}");
}

#[test]
fn corrupted_gradient_fails_the_check() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["gradcheck", "--out-dir", "out", "--div", "6", "--corrupt-gradient"]);
    assert_eq!(code(&o), 3);
    // the report is still written for inspection
    assert!(tmp.path().join("out/gradcheck.csv").exists());
}

#[test]
fn invert_square_constant_recovers_k() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(
        tmp.path(),
        &["invert", "--preset", "square-constant", "--measurements", "2", "--div", "10", "--out-dir", "out"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hist = fs::read_to_string(tmp.path().join("out/history.csv")).unwrap();
    assert!(hist.starts_with("iter,cost,flux_error,k_l2_error,alpha\n"));
    let last = hist.lines().last().unwrap();
    let k_err: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!(k_err < 0.02, "{last}");
    let vtk = fs::read_to_string(tmp.path().join("out/fields.vtk")).unwrap();
    for name in ["k_initial", "k_final", "k_target", "u_m0", "u_m1"] {
        assert!(vtk.contains(&format!("SCALARS {name} double")), "{name} missing");
    }
    assert!(tmp.path().join("out/flux_m1.csv").exists());
}

#[test]
fn invert_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |d| vec!["invert", "--preset", "square-linear", "--div", "6", "--max-iters", "10", "--out-dir", d];
    assert_eq!(code(&calderon(tmp.path(), &args("a"))), 0);
    assert_eq!(code(&calderon(tmp.path(), &args("b"))), 0);
    let a = fs::read(tmp.path().join("a/history.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/history.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn region_dofs_must_form_a_lattice() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["invert", "--preset", "square-gaussian", "--dofs", "24", "--div", "5"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_and_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.cfg"),
        "# small run\npreset = square-gaussian\ndivisions = 5\ndofs = 25\n[descent]\nmax_iters = 3\n[output]\ndir = from-config\n",
    )
    .unwrap();
    let o = calderon(tmp.path(), &["invert", "--config", "run.cfg", "--set", "descent.max_iters=4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hist = fs::read_to_string(tmp.path().join("from-config/history.csv")).unwrap();
    // header, initial record, four iterations at most
    assert!(hist.lines().count() <= 6);
    let manifest = fs::read_to_string(tmp.path().join("from-config/manifest.txt")).unwrap();
    assert!(manifest.contains("Regions(25)"));
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["invert", "--set", "descent.bogus=1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn env_var_sets_output_dir_and_flag_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_calderon"))
        .current_dir(tmp.path())
        .env("CALDERON_OUT_DIR", "from-env")
        .args(["oned-demo"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("from-env/oned_demo.csv").exists());
    let o = Command::new(env!("CARGO_BIN_EXE_calderon"))
        .current_dir(tmp.path())
        .env("CALDERON_OUT_DIR", "from-env")
        .args(["oned-demo", "--out-dir", "from-flag"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("from-flag/oned_demo.csv").exists());
}

#[test]
fn oned_demo_profiles_share_boundary_data() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["invert", "--preset", "oned-demo", "--seed", "3", "--out-dir", "out"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("out/oned_demo.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    let names: std::collections::BTreeSet<_> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(names.len(), 4);
    for r in &rows {
        let flux: f64 = r[7].parse().unwrap();
        assert!((flux + 1.0).abs() < 1e-12, "{r:?}");
    }
    for r in rows.iter().filter(|r| r[1] == "3") {
        assert_eq!(r[6].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn forward_writes_vtk_per_measurement() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calderon(tmp.path(), &["forward", "--preset", "three-region-2d", "--div", "4", "--out-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let vtk = fs::read_to_string(tmp.path().join("out/forward_m0.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
}
