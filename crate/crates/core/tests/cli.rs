mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::{job, BENCHMARK};
use maxgraph::{Domain, Mode};
use serde_json::{json, Value};

fn maxgraph(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_maxgraph")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/run_report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_schema(report: &Value) {
    let v = validator();
    let errors: Vec<String> = v.iter_errors(report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{report:#}");
}

fn small_job() -> Value {
    serde_json::to_value(job(Domain::unit_disc(), &BENCHMARK, 0.25, 0.1)).unwrap()
}

#[test]
fn solve_report_matches_schema_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "job.json", &small_job());
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        maxgraph(&["solve", "--config", cfg, "--out", a.to_str().unwrap(), "--canonical"]).0,
        0
    );
    assert_eq!(
        maxgraph(&["solve", "--config", cfg, "--out", b.to_str().unwrap(), "--canonical"]).0,
        0
    );
    for f in ["report.json", "solution.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report: Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_schema(&report);
    assert_eq!(report["mode"], "solve");
    assert_eq!(report["converged"], true);
    assert_eq!(report["wall_seconds"], 0.0);
    let csv = std::fs::read_to_string(a.join("solution.csv")).unwrap();
    assert!(csv.lines().count() > 300);
}

#[test]
fn check_mode_fails_on_large_hessian() {
    let dir = tempfile::tempdir().unwrap();
    // sup|||D²φ||| = 0.02 and sup_∂|||Dφ||| = 0.1 on the unit disc
    let mut v = small_job();
    v["phi"] = json!([format!("0.01*x1^2 + {}*x2", 0.0096f64.sqrt())]);
    v["n"] = json!(1);
    let cfg = write_config(dir.path(), "job.json", &v);
    let (code, stdout) = maxgraph(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_schema(&report);
    assert_eq!(report["hypothesis"]["pass"], false);
    assert!((report["hypothesis"]["lhs"].as_f64().unwrap() - 1.48).abs() < 1e-6);
}

#[test]
fn bad_configs_exit_four_with_a_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_job();
    v["phi"] = json!(["sin(x1", "0"]);
    let bad_expr = write_config(dir.path(), "expr.json", &v);
    std::fs::write(dir.path().join("syntax.json"), "{ not json").unwrap();
    let mut v = small_job();
    v["h"] = json!(0.5);
    let coarse = write_config(dir.path(), "coarse.json", &v);
    let missing = dir.path().join("missing.json");
    for p in [bad_expr, dir.path().join("syntax.json"), coarse, missing] {
        let (code, stdout) = maxgraph(&["solve", "--config", p.to_str().unwrap()]);
        assert_eq!(code, 4, "{}", p.display());
        let report: Value = serde_json::from_str(&stdout).unwrap();
        assert_schema(&report);
        assert!(report["error"].is_string());
    }
}

#[test]
fn large_data_minimal_run_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_job();
    v["phi"] = json!(["5*sin(6*(x1 + x2))", "5*cos(6*(x1 - x2))"]);
    v["h"] = json!(0.05);
    let cfg = write_config(dir.path(), "job.json", &v);
    let (code, stdout) = maxgraph(&["minimal", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 3);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_schema(&report);
    assert_eq!(report["converged"], false);
    assert!(report["error"].as_str().unwrap().contains("converge"));
}

#[test]
fn flow_and_mms_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_job();
    v["flow"] = json!({ "dt": 0.05, "t_final": 0.5 });
    v["compare_elliptic"] = json!(true);
    let cfg = write_config(dir.path(), "flow.json", &v);
    let out = dir.path().join("flow");
    assert_eq!(
        maxgraph(&["flow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0,
        0
    );
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t,sup_slope_sq,min_sqrt_detg,residual");
    assert_eq!(traj.lines().count(), 11);
    assert!(out.join("final.csv").exists());
    let report: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_schema(&report);
    assert!(report["audits"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a["name"] == "flow_elliptic_distance"));

    let mut v = small_job();
    v["phi"] = json!(["0.1*sin(x1)*sin(x2)"]);
    v["n"] = json!(1);
    v["mms"] = json!({ "hs": [0.1, 0.05] });
    let cfg = write_config(dir.path(), "mms.json", &v);
    let out = dir.path().join("mms");
    assert_eq!(
        maxgraph(&["mms", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0,
        0
    );
    let table = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn sweep_over_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let jobs: Vec<Value> = [0.25, 0.5, 0.75]
        .iter()
        .map(|&k| {
            let mut j = job(Domain::unit_disc(), &["0.002*sin(x1 + x2)", "0.002*cos(x1 - x2)"], k, 0.1);
            j.mode = Some(Mode::Solve);
            serde_json::to_value(j).unwrap()
        })
        .collect();
    let cfg = write_config(dir.path(), "sweep.json", &Value::Array(jobs));
    let out = dir.path().join("out");
    assert_eq!(
        maxgraph(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).0,
        0
    );
    let mut rdr = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(&r[5], "true");
        assert_eq!(&r[9], "0");
    }
    assert!(out.join("job_2").join("report.json").exists());
}

#[test]
fn sweep_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), "empty.json", &json!([]));
    let (code, stdout) = maxgraph(&["sweep", "--config", empty.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 1);

    let object = write_config(dir.path(), "object.json", &small_job());
    assert_eq!(maxgraph(&["sweep", "--config", object.to_str().unwrap()]).0, 4);

    let mut good = small_job();
    good["mode"] = json!("check");
    let mut bad = good.clone();
    bad["domain"] = json!({ "shape": "disc", "center": [0, 0], "radius": -1 });
    let mixed = write_config(dir.path(), "mixed.json", &json!([good, bad]));
    let (code, stdout) = maxgraph(&["sweep", "--config", mixed.to_str().unwrap()]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_reader(stdout.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(&rows[1][9], "4");
    assert!(!rows[1][10].is_empty());
    assert_eq!(&rows[0][10], "");
}
