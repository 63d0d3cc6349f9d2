use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ribodelay(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ribodelay"))
        .args(args)
        .current_dir(dir)
        .env_remove("RIBODELAY_OUT")
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn point<'a>(doc: &'a Value, kind: &str) -> Option<&'a Value> {
    doc["equilibria"].as_array().unwrap().iter().find(|e| e["kind"] == kind)
}

#[test]
fn equilibria_report_the_top_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = ribodelay(&["equilibria", "--model", "single", "--tau", "12", "--rt", "50", "-o", "eq"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("eq/equilibria.json")).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let top = point(&doc, "top").unwrap();
    assert!((top["proteins"][0].as_f64().unwrap() - 0.7434).abs() < 5e-4);
    assert!((top["resource"].as_f64().unwrap() - 5.3982).abs() < 5e-4);
    assert_eq!(top["stability"], "stable");
    assert_eq!(doc["incomplete"], false);
}

#[test]
fn starved_point_has_only_the_trivial_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let out = ribodelay(&["equilibria", "--tau", "45", "--rt", "5", "-o", "eq"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&dir.path().join("eq/equilibria.json"));
    assert_eq!(doc["equilibria"].as_array().unwrap().len(), 1);
    assert!(point(&doc, "trivial").is_some());
}

#[test]
fn malformed_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "model = \"single\"\n[params]\ntua = 12\nrt = 50\n").unwrap();
    let out = ribodelay(&["--config", "run.toml", "equilibria"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tua"));
}

#[test]
fn invalid_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = ribodelay(&["equilibria", "--tau", "12", "--rt=-1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("total_resource"));
    let out = ribodelay(&["equilibria", "--tau", "12"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = ribodelay(&["reproduce", "fig99"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_and_env_sets_the_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[params]\ntau = 45\nrt = 50\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ribodelay"))
        .args(["--config", "run.toml", "equilibria", "--rt", "5"])
        .current_dir(dir.path())
        .env("RIBODELAY_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&dir.path().join("from-env/equilibria.json"));
    assert_eq!(doc["params"]["delay"], 45.0);
    assert_eq!(doc["params"]["total_resource"], 5.0);
}

#[test]
fn every_output_has_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = ribodelay(&["simulate", "--tau", "5", "--rt", "50", "--t-end", "50", "-o", "sim"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    for name in ["simulation.csv", "simulation.json"] {
        let meta = json(&dir.path().join(format!("sim/{name}.meta.json")));
        assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
        assert_eq!(meta["config"]["t_end"], 50.0);
    }
}

fn grid(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["stability-grid", "--tau", "0:20:16", "--rt", "0:60:16", "-o", out];
    args.extend_from_slice(extra);
    let run = ribodelay(&args, dir);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn grids_do_not_depend_on_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    grid(dir.path(), "one", &["--jobs", "1"]);
    grid(dir.path(), "two", &["--jobs", "2"]);
    for name in ["stability_top.csv", "stability_top.ppm", "stability_top.csv.meta.json"] {
        let a = fs::read(dir.path().join("one").join(name)).unwrap();
        let b = fs::read(dir.path().join("two").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn resume_leaves_finished_grids_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    grid(dir.path(), "g", &[]);
    let before = fs::read(dir.path().join("g/stability_top.csv")).unwrap();
    grid(dir.path(), "g", &["--resume"]);
    assert_eq!(before, fs::read(dir.path().join("g/stability_top.csv")).unwrap());
    // A different configuration is recomputed.
    grid(dir.path(), "g", &["--resume", "--order", "12"]);
    let meta = json(&dir.path().join("g/stability_top.csv.meta.json"));
    assert_eq!(meta["config"]["options"]["mesh"]["order"], 12);
}

#[test]
fn middle_grid_has_no_stable_cells() {
    let dir = tempfile::tempdir().unwrap();
    grid(dir.path(), "m", &["--eq", "middle"]);
    let summary = json(&dir.path().join("m/stability_middle.json"));
    assert_eq!(summary["counts"]["stable"], 0);
    assert!(summary["counts"]["unstable"].as_u64().unwrap() > 0);
}

#[test]
fn boundary_fit_of_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    let run = ribodelay(
        &["stability-grid", "--tau", "0:20:41", "--rt", "0:60:41", "-o", "g"],
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(0));
    let run = ribodelay(
        &["boundary-fit", "--input", "g/stability_top.csv", "--min-tau", "0.75", "-o", "fit"],
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let fit = json(&dir.path().join("fit/boundary.json"));
    let c = fit["coefficients"].as_array().unwrap();
    assert!((c[1].as_f64().unwrap() - 2.6449).abs() < 0.1);
    assert!(fit["r2"].as_f64().unwrap() > 0.99);
}

#[test]
fn bvp_finds_the_orbit_at_12_50() {
    let dir = tempfile::tempdir().unwrap();
    let run = ribodelay(&["reproduce", "fig5", "-o", "r"], dir.path());
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let doc = json(&dir.path().join("r/fig5/periodic.json"));
    assert_eq!(doc["converged"], true);
    assert!(doc["residual_norm"].as_f64().unwrap() < 1e-9);
    assert!((doc["period"].as_f64().unwrap() - 12.0).abs() < 0.12);
    assert!(dir.path().join("r/fig5/periodic.csv").exists());
}

#[test]
fn bvp_without_oscillation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let run = ribodelay(&["bvp", "--tau", "5", "--rt", "5", "-o", "b"], dir.path());
    assert_eq!(run.status.code(), Some(4), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn fig13_shows_the_phase_shift() {
    let dir = tempfile::tempdir().unwrap();
    let run = ribodelay(&["reproduce", "fig13", "-o", "r"], dir.path());
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let shifted = json(&dir.path().join("r/fig13/tau25_rt11.8/periodic.json"));
    assert!(shifted["peak_offsets"][1].as_f64().unwrap().abs() > 0.1);
    let in_phase = json(&dir.path().join("r/fig13/tau5.7_rt100/periodic.json"));
    for o in in_phase["peak_offsets"].as_array().unwrap() {
        assert!(o.as_f64().unwrap().abs() < 0.05);
    }
}
