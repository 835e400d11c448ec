use std::path::Path;
use std::process::{Command, Output};

fn nkl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nkl"))
        .args(args)
        .current_dir(cwd)
        .env("NKL_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn records(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn model_inspect_reports_lyapunov_constant_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let o = nkl(&["model-inspect", "--model", "cauchy", "--beta", "2", "--x", "0"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("x,rho,grad_log_rho,V,minus_AV_over_V,schrodinger_U\n"));
    let rows = records(&text);
    assert_eq!(rows.len(), 1);
    let v: f64 = rows[0][4].parse().unwrap();
    assert!((v - 2.0).abs() <= 1e-12);
    assert!(o.stderr.is_empty());
}

#[test]
fn model_inspect_default_points_and_negative_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = nkl(&["model-inspect", "--model", "exp-smooth", "--a", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(records(&stdout(&o)).len(), 5);
    let o = nkl(&["model-inspect", "--x", "-3,3"], dir.path());
    let rows = records(&stdout(&o));
    assert_eq!(rows[0][1], rows[1][1]);
}

#[test]
fn usage_errors_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = nkl(&["verify-all", "--n", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains('n'));

    let o = nkl(&["verify-all", "--scenario", "nonexistent"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = nkl(&["model-inspect", "--model", "cauchy", "--a", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = nkl(&["model-inspect", "--model", "cauchy", "--beta", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = nkl(&["no-such-command"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.json"), "{\"grid\": {\"n\": ").unwrap();
    let o = nkl(&["model-inspect", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"model": {"family": "cauchy", "beta": 3}, "alpha_list": [0.75]}"#,
    )
    .unwrap();
    let o = nkl(
        &["verify-all", "--config", "cfg.json", "--beta", "2", "--scenario", "gamma-recursion", "--out", "o"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["model"]["beta"], 2.0);
    assert_eq!(summary["config"]["alpha_list"][0], 0.75);
    assert_eq!(summary["exit_code"], 0);
}

#[test]
fn verify_all_subset_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "verify-all",
        "--scenario",
        "shifted-power-comparison",
        "--scenario",
        "lyapunov-cauchy",
        "--out",
        "out",
    ];
    let o = nkl(&args, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "shifted-power-comparison");
    assert_eq!(&rows[0][1], "pass");
    let csv = std::fs::read_to_string(dir.path().join("out/shifted-power-comparison.csv")).unwrap();
    assert!(csv.starts_with("scenario,metric,value,tolerance,reference,check,pass,detail\n"));
    assert!(csv.contains("checks,960.0"));
    let first = std::fs::read(dir.path().join("out/lyapunov-cauchy.csv")).unwrap();
    let again = nkl(&args, dir.path());
    assert_eq!(again.stdout, o.stdout);
    assert_eq!(std::fs::read(dir.path().join("out/lyapunov-cauchy.csv")).unwrap(), first);
}

#[test]
fn fractional_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = nkl(&["fractional-check", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("balakrishnan,") && text.contains("subordination,"));
}

#[test]
fn nash_sweep_on_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = nkl(&["nash", "--L", "8", "--n", "201", "--alpha", "0.5,1.5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = records(&stdout(&o));
    // one row per (alpha, probe)
    assert_eq!(rows.len(), 64 * 2);
    assert!(rows[..64].iter().all(|r| !r[2].is_empty()));
    assert!(rows[64..].iter().all(|r| r[2].is_empty()));
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn kernel_bound_fits_classical_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let o = nkl(
        &["kernel-bound", "--model", "cauchy", "--beta", "2", "--alpha", "1", "--L", "8", "--n", "801", "--out", "kb"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = records(&stdout(&o));
    let fit = rows.iter().find(|r| &r[0] == "fit").unwrap();
    let slope: f64 = fit[5].parse().unwrap();
    assert!((slope + 0.5).abs() <= 0.15 * 0.5, "slope {slope}");
    assert_eq!(rows.iter().filter(|r| &r[0] == "point").count(), 6);
    assert!(dir.path().join("kb/kernel_bound.json").exists());
}
