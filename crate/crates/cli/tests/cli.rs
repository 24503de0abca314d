use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ncphase(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ncphase"));
    cmd.args(args).env_remove("NCPHASE_TOL_SINGULAR");
    cmd
}

fn run(args: &[&str], config: &str) -> Output {
    ncphase(args).arg("--config").arg(fixture(config)).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn brackets_report_canonical_structure() {
    let out = run(&["brackets"], "canonical.json");
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["dimension"], 2);
    let lambda = v["lambda"].as_array().unwrap();
    assert_eq!(lambda[0][2].as_f64(), Some(1.0));
    assert_eq!(lambda[2][0].as_f64(), Some(-1.0));
    let q1p1 = v["brackets"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["f"] == "q1" && e["g"] == "p1")
        .unwrap();
    assert_eq!(q1p1["value"].as_f64(), Some(1.0));
}

#[test]
fn singular_structure_reports_kernel_dimension() {
    let out = run(&["brackets"], "degenerate.json");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("kernel dimension 2"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn config_errors_point_at_line_and_field() {
    let out = run(&["brackets"], "bad_syntax.json");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad_syntax.json:4:"), "{}", stderr(&out));

    let out = run(&["simulate"], "bad_schema.json");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("initial_state"), "{}", stderr(&out));

    let out = run(&["brackets"], "unknown_field.json");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("spring"), "{}", stderr(&out));
}

#[test]
fn step_rejection_suggests_a_step() {
    let out = run(&["simulate"], "stiff.json");
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("try dt <="), "{}", stderr(&out));
}

#[test]
fn inconsistent_chain_still_writes_report() {
    let out = run(&["reduce"], "inconsistent.json");
    assert_eq!(out.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["status"], "inconsistent");
    assert_eq!(v["inconsistency"]["step"], 1);
}

#[test]
fn degenerate_reduce_gives_two_dimensional_chain() {
    let out = run(&["reduce"], "degenerate.json");
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["status"], "consistent");
    assert_eq!(v["dims"], serde_json::json!([4, 2]));
    let eig = v["eigenvalues"].as_array().unwrap();
    assert_eq!(eig.len(), 2);
    for e in eig {
        assert!((e[1].as_f64().unwrap().abs() - 0.5).abs() < 1e-10);
    }
}

#[test]
fn simulate_csv_has_expected_columns() {
    let out = run(&["simulate"], "planar.json");
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,q1,q2,p1,p2,H,Lambda3"));
    assert_eq!(lines.count(), 401);

    let text = stdout(&run(&["simulate"], "degenerate.json"));
    assert_eq!(text.lines().next(), Some("t,q1,q2,p1,p2,H,constraint_residual"));

    let text = stdout(&run(&["simulate"], "axial_parallel.json"));
    assert_eq!(text.lines().next(), Some("t,q1,q2,q3,p1,p2,p3,H,Lambda3"));
}

#[test]
fn free_particle_energy_is_conserved() {
    let text = stdout(&run(&["simulate"], "free_particle.json"));
    let energies: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    for e in &energies {
        assert!((e - energies[0]).abs() < 1e-12);
    }
}

#[test]
fn out_flag_beats_config_output() {
    let dir = tempfile::tempdir().unwrap();
    let from_config = dir.path().join("from_config.json");
    let from_flag = dir.path().join("from_flag.json");
    let cfg = dir.path().join("cfg.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("planar.json")).unwrap()).unwrap();
    v["output"] = serde_json::Value::String(from_config.to_string_lossy().into_owned());
    std::fs::write(&cfg, serde_json::to_string(&v).unwrap()).unwrap();

    let out = ncphase(&["darboux", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(from_config.exists());

    std::fs::remove_file(&from_config).unwrap();
    let out = ncphase(&["darboux", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&from_flag)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(from_flag.exists());
    assert!(!from_config.exists());
    let stdout_run = stdout(&run(&["darboux"], "planar.json"));
    assert_eq!(std::fs::read_to_string(&from_flag).unwrap(), stdout_run);
}

#[test]
fn failed_run_leaves_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("never.csv");
    let out = ncphase(&["simulate", "--config"])
        .arg(fixture("stiff.json"))
        .arg("--out")
        .arg(&target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(!target.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn env_tolerance_overrides_singularity_threshold() {
    // det Psi = chi^2 = 2.25 for B = 1, C = 0.5
    let out = ncphase(&["brackets", "--config"])
        .arg(fixture("planar.json"))
        .env("NCPHASE_TOL_SINGULAR", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = ncphase(&["brackets", "--config"])
        .arg(fixture("planar.json"))
        .env("NCPHASE_TOL_SINGULAR", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn negative_chi_darboux_routes_to_gram_schmidt() {
    let out = run(&["darboux"], "negative_chi.json");
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["note"].as_str().unwrap().contains("chi"));
    assert!(v["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn limit_scan_rows_follow_grid() {
    let out = ncphase(&["limit-scan", "--points", "3", "--eps-max", "0.1", "--eps-min", "0.001", "--config"])
        .arg(fixture("degenerate.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let eps: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(eps.len(), 3);
    assert!((eps[1] - 0.01).abs() < 1e-15);
}
