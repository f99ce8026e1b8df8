use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cglp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("CGLP_OUT_DIR").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const REFERENCE: &str = r#"{
  "cglp": {"gamma": 0.3, "alpha": 1.21, "f_r_hz": 324, "f_f_hz": 4206, "K_P": 0.1645}
}"#;

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn config_problems_exit_with_code_4() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(code(&run(&["analyze", "--config", "/nonexistent.json", "--out", o])), 4);
    let bad = write_config(d.path(), "bad.json", r#"{"plant": {"K_e": 10, "typo": 1}}"#);
    let r = run(&["analyze", "--config", bad.to_str().unwrap(), "--out", o]);
    assert_eq!(code(&r), 4);
    assert!(String::from_utf8_lossy(&r.stderr).contains("typo"));
    let neg = write_config(d.path(), "neg.json", r#"{"plant": {"K_e": 10, "f_e_hz": -935, "K_m": 0.4986, "f_m_hz": 747, "xi_m": 0.0089, "kappa_max": 1.6165}}"#);
    assert_eq!(code(&run(&["analyze", "--config", neg.to_str().unwrap(), "--out", o])), 4);
    let good = write_config(d.path(), "good.json", "{}");
    assert_eq!(code(&run(&["analyze", "--config", good.to_str().unwrap(), "--kappa", "0.5", "--out", o])), 4);
    assert_eq!(code(&run(&["bogus", "--config", good.to_str().unwrap()])), 4);
}

#[test]
fn linear_tuning_reports_and_flags_infeasibility() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", "{}");
    let out = d.path().join("ok");
    let r = run(&["tune", "--mode", "linear", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let v = read_json(&out.join("tune_linear.json"));
    let k = v["result"]["K_P_star"].as_f64().unwrap();
    assert!((k / 0.1303 - 1.0).abs() < 0.02);

    let wide = write_config(
        d.path(),
        "wide.json",
        r#"{"plant": {"K_e": 10, "f_e_hz": 935, "K_m": 0.4986, "f_m_hz": 747, "xi_m": 0.0089, "kappa_max": 5.5}}"#,
    );
    let out = d.path().join("bad");
    let r = run(&["tune", "--mode", "linear", "--config", wide.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 2);
    let v = read_json(&out.join("tune_linear.json"));
    assert_eq!(v["result"]["feasible"], Value::Bool(false));
    assert!((v["result"]["kappa_bound"].as_f64().unwrap() - 4.818).abs() < 5e-3);
}

#[test]
fn analyze_is_idempotent() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", REFERENCE);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for out in [&a, &b, &a] {
        assert_eq!(code(&run(&["analyze", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "open_loop_k1.6165.csv"));
    assert!(names.iter().any(|n| n == "analyze.svg"));
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
    let csv = std::fs::read_to_string(a.join("open_loop_k1.0000.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("freq_hz,mag_db,phase_deg"));
}

#[test]
fn single_harmonic_pseudo_sensitivity_is_the_first_harmonic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", REFERENCE);
    let out = d.path().join("h");
    let r = run(&["hosidf", "--config", cfg.to_str().unwrap(), "--nmax", "1", "--kappa", "1,1.6165", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let mut rd = csv::Reader::from_path(out.join("pseudo.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["freq_hz", "S1_db", "Sinf_db", "T1_db", "Tinf_db", "kappa"]);
    let mut n = 0;
    for row in rd.records() {
        let row = row.unwrap();
        let f = |i: usize| row[i].parse::<f64>().unwrap();
        assert!((f(1) - f(2)).abs() < 1e-9);
        assert!((f(3) - f(4)).abs() < 1e-9);
        n += 1;
    }
    assert!(n > 100);
    let h = std::fs::read_to_string(out.join("hosidf.csv")).unwrap();
    assert_eq!(h.lines().next(), Some("freq_hz,n,mag_db,phase_deg,kappa,quantity"));
}

#[test]
fn simulate_writes_traces_and_metrics() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", REFERENCE);
    let out = d.path().join("env_out");
    let r = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--controller", "cglp,linear", "--kappa", "1,1.6165"])
        .env("CGLP_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let v = read_json(&out.join("simulate_step.json"));
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    for run in runs {
        let os = run["metrics"]["overshoot_pct"].as_f64().unwrap();
        assert!(os > 5.0 && os < 16.0);
    }
    let trace = std::fs::read_to_string(out.join("trace_cglp_step_k1.0000.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("t_s,ref_um,y_um,e_um,u_V,reset_event"));
    assert!(lines.any(|l| l.ends_with(",1")));

    let out = d.path().join("sine");
    let r = run(&["simulate", "--config", cfg.to_str().unwrap(), "--input", "sine", "--freq", "80", "--kappa", "1",
                  "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let v = read_json(&out.join("simulate_sine.json"));
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    assert!(v["runs"][0]["sine"]["t1_gain_db"].as_f64().unwrap().abs() < 1.5);
}

#[test]
fn validate_reports_every_criterion() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", REFERENCE);
    let out = d.path().join("v");
    let r = run(&["validate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let v = read_json(&out.join("validation.json"));
    let passed = v["passed"].as_bool().unwrap();
    assert_eq!(code(&r), if passed { 0 } else { 3 });
    let checks = v["checks"].as_array().unwrap();
    for c in 1..=8 {
        assert!(checks.iter().any(|x| x["criterion"] == c), "criterion {c}");
    }
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert_eq!(stdout.lines().count(), checks.len());
}
