use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CHEB: &str = r#"{"measures":[{"interval":[-1,1],"weight":{"type":"jacobi","alpha":-0.5,"beta":-0.5},"sign":1}],"precision_bits":256}"#;

const TWO: &str = r#"{"measures":[
  {"interval":[-1,1],"weight":{"type":"jacobi","alpha":-0.5,"beta":-0.5}},
  {"interval":[2,3],"weight":{"type":"jacobi","alpha":0,"beta":0}}],
 "precision_bits":256,
 "ladder":{"kind":"diagonal","k":[2,3,4]}}"#;

const TOUCHING: &str = r#"{"measures":[
  {"interval":[-1,1],"weight":{"type":"jacobi","alpha":-0.5,"beta":-0.5}},
  {"interval":[1,3],"weight":{"type":"jacobi","alpha":0,"beta":0}}],
 "pole_sheet":1}"#;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn hp(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hp"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_prints_solution_with_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cheb.json", CHEB);
    let out = hp(&["solve", "--index", "8"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["header"]["command"], "solve");
    assert_eq!(v["header"]["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(v["header"]["precision_trace"][0], 256);
    assert_eq!(v["result"]["index"][0], 8);
    assert_eq!(v["result"]["polys"][1]["coefficients"].as_array().unwrap().len(), 9);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "two.json", TWO);
    let a = hp(&["solve", "--index", "3,2"], &cfg);
    let b = hp(&["solve", "--index", "3,2"], &cfg);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = hp(&["solve", "--index", "2,3"], &cfg);
    assert_ne!(json(&a)["header"]["config_sha256"], json(&c)["header"]["config_sha256"]);
}

#[test]
fn pole_sheet_out_of_range_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "two.json", TWO);
    let out = hp(&["ratio", "--pole-sheet", "3"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pole sheet 3"));
}

#[test]
fn touching_intervals_are_rejected_for_surfaces() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "touching.json", TOUCHING);
    let out = hp(&["surface"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disjoint"));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "two.json", TWO);
    assert_eq!(hp(&["solve", "--index", "3,2", "--bogus"], &cfg).status.code(), Some(2));
    assert_eq!(hp(&["zeros", "--index", "3,2", "--level", "5"], &cfg).status.code(), Some(2));
    assert_eq!(hp(&["solve", "--index", "3,2,1"], &cfg).status.code(), Some(2));
    let broken = write(&dir, "broken.json", "{\"measures\": [");
    assert_eq!(hp(&["solve", "--index", "1"], &broken).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "two.json", TWO);
    // 64 bits cannot resolve the null space of a 60 x 60 system
    let out = hp(&["solve", "--index", "10,10", "--sketch"], &cfg);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zeros_lie_in_the_requested_interval() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "two.json", TWO);
    let out = hp(&["zeros", "--index", "3,2", "--level", "1"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let roots = json(&out)["result"]["roots"].as_array().unwrap().clone();
    assert_eq!(roots.len(), 3);
    for r in roots {
        let x: f64 = r.as_str().unwrap().parse().unwrap();
        assert!(-1.0 < x && x < 1.0);
    }
}

#[test]
fn ladder_commands_write_json_csv_and_plot_script() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "two.json", TWO);
    let out_path = dir.path().join("run").join("converge.json");
    let out = hp(&["converge", "--jobs", "1", "--out", out_path.to_str().unwrap()], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["result"]["experiment"], "markov_convergence");
    assert_eq!(report["result"]["ladder"].as_array().unwrap().len(), 3);
    let csv = fs::read_to_string(out_path.with_extension("csv")).unwrap();
    assert!(csv.starts_with("index,total,probe,"));
    assert!(csv.lines().count() > 3);
    let gp = fs::read_to_string(out_path.with_extension("gp")).unwrap();
    assert!(gp.contains("set logscale y") && gp.contains("plot "));
}

#[test]
fn surface_reports_boundary_residuals() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "two.json", TWO);
    let out = hp(&["surface", "--pole-sheet", "2"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["map"]["pole_sheet"], 2);
    let dev = v["result"]["bvp_residual"]["modulus_deviation"].as_array().unwrap();
    assert!(dev.iter().all(|d| d.as_f64().unwrap() < 1e-40));
}
