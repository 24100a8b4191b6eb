use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use parallel_cbf::trajectory::read_csv;
use serde_json::Value;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn pcbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcbf")).args(args).output().expect("pcbf runs")
}

fn cfg(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_parallel_pair_completes() {
    let out = tempfile::tempdir().unwrap();
    let o = pcbf(&["run", "--config", &cfg("fig1_parallel.toml"), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.path().join("fig1_parallel.summary.json"));
    assert_eq!(s["event"], "completed");
    assert_eq!(s["samples"], 10001);
    assert!(s["min_h1"].as_f64().unwrap() >= -1e-6);
    assert!(s["min_hbar1"].as_f64().unwrap() >= -1e-6);

    let traj = read_csv(fs::File::open(out.path().join("fig1_parallel.csv")).unwrap()).unwrap();
    assert_eq!(traj.samples.len(), 10001);
    assert_eq!(traj.state_names, ["x", "y", "v", "theta"]);
    assert_eq!(traj.input_names, ["u_v", "u_theta"]);
}

#[test]
fn run_single_baseline_blows_up() {
    let out = tempfile::tempdir().unwrap();
    let o = pcbf(&["run", "--config", &cfg("fig1_single.toml"), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let s = json(&out.path().join("fig1_single.summary.json"));
    assert_eq!(s["event"], "control_blow_up");
    let t = s["t_event"].as_f64().unwrap();
    assert!((2.0..=2.5).contains(&t), "{t}");
}

#[test]
fn csv_header_order() {
    let out = tempfile::tempdir().unwrap();
    pcbf(&["run", "--config", &cfg("fig1_parallel.toml"), "--out", out.path().to_str().unwrap(), "--horizon", "0.01"]);
    let text = fs::read_to_string(out.path().join("fig1_parallel.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,x,y,v,theta,u0_u_v,u0_u_theta,u_u_v,u_u_theta,h_1,h_2,hbar_1,hbar_2,slab_lower,slab_upper,active_branch"
    );
    assert_eq!(text.lines().count(), 1 + 11);
}

#[test]
fn zero_dt_is_a_usage_error() {
    let o = pcbf(&["run", "--config", &cfg("fig1_parallel.toml"), "--dt", "0", "--out", "/nonexistent"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("di_parallel.toml"))
        .unwrap()
        .replace("hold = 0.25", "hold = 0.25.1");
    let path = dir.path().join("broken.toml");
    fs::write(&path, &text).unwrap();
    let line = text.lines().position(|l| l.contains("0.25.1")).unwrap() + 1;
    let o = pcbf(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("broken.toml:{line}:")), "{err}");
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(pcbf(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pcbf(&["run"]).status.code(), Some(1));
    assert_eq!(pcbf(&["--help"]).status.code(), Some(0));
    assert_eq!(pcbf(&["run", "--config", "/does/not/exist.toml"]).status.code(), Some(1));
}

#[test]
fn compare_pair_against_single() {
    let out = tempfile::tempdir().unwrap();
    let o = pcbf(&[
        "compare",
        "--config",
        &cfg("fig1_parallel.toml"),
        "--config",
        &cfg("fig1_single.toml"),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let c = json(&out.path().join("comparison.json"));
    assert_eq!(c["a"]["event"], "completed");
    assert_eq!(c["b"]["event"], "control_blow_up");
    assert!(out.path().join("a.csv").exists() && out.path().join("b.csv").exists());
}

#[test]
fn compare_identical_configs_gives_identical_outputs() {
    let out = tempfile::tempdir().unwrap();
    let p = cfg("di_parallel.toml");
    let o = pcbf(&["compare", "--config", &p, "--config", &p, "--out", out.path().to_str().unwrap(), "--horizon", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let a = fs::read(out.path().join("a.csv")).unwrap();
    let b = fs::read(out.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let c = json(&out.path().join("comparison.json"));
    for key in ["event", "t_event", "min_h1", "min_hbar1", "max_abs_u_filtered", "samples"] {
        assert_eq!(c["a"][key], c["b"][key], "{key}");
    }
}

#[test]
fn compare_needs_two_configs() {
    let o = pcbf(&["compare", "--config", &cfg("di_parallel.toml")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_first_gain_all_complete() {
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pcbf"))
        .args(["sweep", "--config", &cfg("fig1_parallel.toml"), "--c1", "0.5,1,2", "--out"])
        .arg(out.path())
        .env("PCBF_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.path().join("sweep.json"));
    let runs = s.as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert!(runs.iter().all(|r| r["event"] == "completed"));
    for g in ["0.5", "1", "2"] {
        assert!(out.path().join(format!("fig1_parallel_c1-{g}.csv")).exists());
    }
}

#[test]
fn sweep_seeds_and_exit_code_with_a_failing_run() {
    let out = tempfile::tempdir().unwrap();
    let o = pcbf(&[
        "sweep",
        "--config",
        &cfg("di_parallel.toml"),
        "--config",
        &cfg("fig1_single.toml"),
        "--seeds",
        "1,2",
        "--horizon",
        "3",
        "--workers",
        "1",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let runs = json(&out.path().join("sweep.json"));
    assert_eq!(runs.as_array().unwrap().len(), 4);
}

#[test]
fn validate_sine_corridor_passes() {
    let o = pcbf(&["validate", "--config", &cfg("fig1_parallel.toml")]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(!text.contains("FAIL"), "{text}");
    for check in ["gradient_nonzero", "finite_difference", "constant_sum", "gain_bound_at_x0"] {
        assert!(text.contains(&format!("PASS {check}")), "{check}");
    }
}

#[test]
fn validate_single_barrier_fails_on_midline() {
    let o = pcbf(&["validate", "--config", &cfg("fig1_single.toml")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL gradient_nonzero"));
}

#[test]
fn validate_boundary_start_fails_gain_bound() {
    let o = pcbf(&["validate", "--config", &cfg("di_boundary.toml")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL gain_bound_at_x0"));
}

#[test]
fn exit_code_depends_only_on_config_and_seed() {
    let p = cfg("di_parallel.toml");
    let codes: Vec<_> = (0..3)
        .map(|_| pcbf(&["run", "--config", &p, "--seed", "5", "--horizon", "1", "--out", "/tmp"]).status.code())
        .collect();
    assert!(codes.iter().all(|c| *c == Some(0)));
}
