use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn halfflow(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_halfflow"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("HALFFLOW_THREADS", t),
        None => cmd.env_remove("HALFFLOW_THREADS"),
    };
    cmd.output().unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(args: &[&str]) -> Value {
    let out = halfflow(args, None);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    for key in ["code", "message", "context"] {
        assert!(err.get(key).is_some(), "missing {key} in {err}");
    }
    err
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_FLOW: &str = "M = 32\ndt = 1e-2\nt_end = 0.2\nsnapshot_stride = 2\n";

#[test]
fn calibrate_writes_record_and_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "cal.cfg", "# grid\nM = 32\n");
    let out = tmp.path().join("out");
    run_ok(&["calibrate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let cal = json(out.join("calibration.json"));
    for key in ["M", "C_half", "C_pv", "residuals"] {
        assert!(cal.get(key).is_some(), "missing {key}");
    }
    assert_eq!(cal["M"], 32);
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("M = 32"));
}

#[test]
fn constant_flow_has_constant_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "flow.cfg", &format!("{SMALL_FLOW}initial = constant\n"));
    let out = tmp.path().join("out");
    run_ok(&["flow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "t,energy,dtu_l2,sphere_drift,max_u");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert_eq!(&r[1..], &[0.0, 0.0, 0.0, 1.0]);
    }
    let first = fs::read_to_string(out.join("u_00000.csv")).unwrap();
    assert!(first.starts_with("x,u_1,u_2,u_3\n"));
    for f in ["report.json", "concentration.json", "calibration.json", "config.resolved", "plot.gp"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
}

#[test]
fn same_seed_gives_identical_bytes_for_any_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "flow.cfg", SMALL_FLOW);
    let mut dirs = Vec::new();
    for (i, threads) in [Some("1"), None, Some("3")].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let o = halfflow(
            &["flow", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", out.to_str().unwrap()],
            threads,
        );
        assert!(o.status.success());
        dirs.push(out);
    }
    for f in ["trace.csv", "u_00005.csv", "u_00010.csv", "report.json", "concentration.json"] {
        let a = fs::read(dirs[0].join(f)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(a, fs::read(d.join(f)).unwrap(), "{f} differs");
        }
    }
    let other = tmp.path().join("other");
    run_ok(&["flow", "--config", cfg.to_str().unwrap(), "--seed", "12", "--out", other.to_str().unwrap()]);
    assert_ne!(fs::read(dirs[0].join("trace.csv")).unwrap(), fs::read(other.join("trace.csv")).unwrap());
}

#[test]
fn scan_and_bubble_read_a_flow_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "flow.cfg", SMALL_FLOW);
    let flow = tmp.path().join("flow");
    run_ok(&["flow", "--config", cfg.to_str().unwrap(), "--out", flow.to_str().unwrap()]);

    let scan_cfg = config(tmp.path(), "scan.cfg", "eps1 = 0.01\n");
    let scan = tmp.path().join("scan");
    run_ok(&[
        "scan", "--config", scan_cfg.to_str().unwrap(), "--trace", flow.to_str().unwrap(),
        "--radii", "0.1,0.2", "--out", scan.to_str().unwrap(),
    ]);
    let rep = json(scan.join("concentration.json"));
    assert_eq!(rep["radii"], serde_json::json!([0.1, 0.2]));
    assert_eq!(rep["times"].as_array().unwrap().len(), 11);
    assert!(fs::read_to_string(scan.join("config.resolved")).unwrap().contains("radii = 0.1,0.2"));

    let bubble_cfg = config(tmp.path(), "bubble.cfg", "L = 10\nline_M = 128\n");
    let bubble = tmp.path().join("bubble");
    run_ok(&[
        "bubble", "--config", bubble_cfg.to_str().unwrap(), "--trace", flow.to_str().unwrap(),
        "--at", "0.1,0.5,0.2", "--out", bubble.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(bubble.join("bubble.csv")).unwrap();
    assert!(csv.starts_with("x,v_1,v_2,v_3\n"));
    assert_eq!(csv.lines().count(), 129);
    let rep = json(bubble.join("bubble_report.json"));
    assert_eq!(rep["scale"], 0.2);
    assert!(rep["residual_l2"].as_f64().unwrap().is_finite());
}

#[test]
fn bubble_outside_the_trace_is_out_of_range() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "flow.cfg", SMALL_FLOW);
    let flow = tmp.path().join("flow");
    run_ok(&["flow", "--config", cfg.to_str().unwrap(), "--out", flow.to_str().unwrap()]);
    let bubble_cfg = config(tmp.path(), "bubble.cfg", "L = 10\nline_M = 128\n");
    let o = halfflow(
        &["bubble", "--config", bubble_cfg.to_str().unwrap(), "--trace", flow.to_str().unwrap(),
          "--at", "5,0.5,0.2", "--out", tmp.path().join("b").to_str().unwrap()],
        None,
    );
    let err = error_json(&o);
    assert_eq!(err["code"], "out_of_range");
    assert_eq!(err["context"]["command"], "bubble");
}

#[test]
fn unknown_and_misplaced_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "bad.cfg", "M = 32\nwarp_factor = 9\n");
    let o = halfflow(&["flow", "--config", cfg.to_str().unwrap()], None);
    let err = error_json(&o);
    assert_eq!(err["code"], "config");
    assert!(err["message"].as_str().unwrap().contains("warp_factor"));

    let cfg = config(tmp.path(), "ok.cfg", SMALL_FLOW);
    let o = halfflow(&["flow", "--config", cfg.to_str().unwrap(), "--at", "1,2,3"], None);
    assert_eq!(error_json(&o)["code"], "config");

    let o = halfflow(&["flow"], None);
    assert_eq!(error_json(&o)["code"], "usage");

    let o = halfflow(&["flow", "--config", cfg.to_str().unwrap()], Some("zero"));
    assert_eq!(error_json(&o)["code"], "config");
}

#[test]
fn variational_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "var.cfg", "M = 16\neps = 0.1\nsweep = 0.2,0.1,0.05,0.025\n");
    let out = tmp.path().join("out");
    run_ok(&["variational", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let minimizer = fs::read_to_string(out.join("minimizer.csv")).unwrap();
    assert!(minimizer.starts_with("t,x,u_1,u_2,u_3\n"));
    assert_eq!(minimizer.lines().count(), 1 + 201 * 16);
    assert!(fs::read_to_string(out.join("ire.csv")).unwrap().starts_with("t,I,R,E\n"));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("eps,dtv_sq\n"));
    assert!(sweep.lines().last().unwrap().starts_with("# slope="));
    let rep = json(out.join("variational_report.json"));
    assert!(rep["energy"]["total"].as_f64().unwrap() <= rep["static_bound"].as_f64().unwrap() * 1.001);
}

#[test]
fn wente_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "w.cfg", "M = 32\npairs = 3\n");
    let out = tmp.path().join("out");
    run_ok(&["wente", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let rep = json(out.join("wente_report.json"));
    assert_eq!(rep["ratios"].as_array().unwrap().len(), 3);
    assert!(rep["max_ratio"].as_f64().unwrap().is_finite());
}

#[test]
fn accept_prints_one_line_per_criterion_and_fails_on_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "a.cfg", "M = 64\ncriteria = 1,2,3,11\n");
    let out = tmp.path().join("ok");
    let o = halfflow(&["accept", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with('[')).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("[SKIP] 11."));

    let cfg = config(tmp.path(), "f.cfg", "M = 64\ncriteria = 4\nc_half_factor = 1.1\n");
    let out = tmp.path().join("fault");
    let o = halfflow(&["accept", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]  4."));
    let err = error_json(&o);
    assert_eq!(err["code"], "acceptance_failed");
    assert_eq!(err["context"]["failed"], serde_json::json!([4]));
}
