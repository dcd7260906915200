//! End-to-end runs of the `lps` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn lps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lps"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("lps-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn verify_theorem_a_passes_and_reports() {
    let out = lps(&[
        "verify-theorem-a",
        "--seed",
        "3",
        "--depth",
        "3",
        "--samples",
        "6",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["command"], "verify-theorem-a");
    assert_eq!(v["pass"], true);
    assert_eq!(v["seed"], 3);
    let suites = v["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 3);
    assert_eq!(suites[0]["suite"], "theorem_a");
    assert_eq!(suites[0]["records"][0]["check"], "theorem_a");
    assert!(v["timestamp"].as_u64().unwrap() > 0);
}

#[test]
fn verify_gamma_and_nc_pass_at_small_scale() {
    let out = lps(&[
        "verify-gamma",
        "--seed",
        "4",
        "--depth",
        "3",
        "--samples",
        "4",
        "--q",
        "1,2",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    let suites = v["suites"].as_array().unwrap();
    assert_eq!(suites[0]["suite"], "gamma_construction");
    assert_eq!(suites[1]["suite"], "gamma_equivalence");
    assert_eq!(suites[1]["records"][0]["check"], "gamma_equivalence");

    let out = lps(&[
        "verify-nc",
        "--seed",
        "5",
        "--samples",
        "6",
        "--factor-dims",
        "2,2",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["suites"][0]["suite"], "nc_theorem");
    assert_eq!(v["suites"][0]["records"][0]["check"], "nc_theorem");
}

#[test]
fn constants_reports_are_deterministic_modulo_timestamp() {
    let args = [
        "constants",
        "--seed",
        "9",
        "--samples",
        "10",
        "--depth",
        "2",
        "--budget",
        "64",
        "--p",
        "2,4",
    ];
    let a = lps(&args);
    let b = lps(&args);
    let mut va = stdout_json(&a);
    let mut vb = stdout_json(&b);
    assert_eq!(va["pass"], true);
    va.as_object_mut().unwrap().remove("timestamp");
    vb.as_object_mut().unwrap().remove("timestamp");
    assert_eq!(va, vb, "identical runs must agree outside the timestamp");
}

#[test]
fn constants_csv_is_the_growth_table() {
    let out = lps(&[
        "constants",
        "--seed",
        "9",
        "--samples",
        "8",
        "--depth",
        "2",
        "--budget",
        "48",
        "--p",
        "2,4",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p,searched_ratio,witness_ratio,envelope,evals,seed"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn config_file_is_loaded_and_flags_override_it() {
    let path = scratch_path("config");
    std::fs::write(
        &path,
        "# comment line\ncommand=verify-semigroup\nseed=11\ndepth=3\nsamples=5\n",
    )
    .unwrap();
    let out = lps(&["--config", path.to_str().unwrap(), "--samples", "2"]);
    let v = stdout_json(&out);
    std::fs::remove_file(&path).ok();
    assert_eq!(v["command"], "verify-semigroup");
    let params = &v["suites"][0]["params"];
    assert_eq!(params["seed"], 11, "config value applies");
    assert_eq!(params["samples"], 2, "flag wins over the config");
    assert_eq!(params["depth"], 3);
}

#[test]
fn output_path_receives_the_report() {
    let path = scratch_path("report.json");
    let out = lps(&[
        "verify-semigroup",
        "--seed",
        "12",
        "--depth",
        "3",
        "--samples",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn emit_kernel_csv_has_quarter_diagonal() {
    let out = lps(&["emit-kernel", "--depth", "4", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[i], "0.25");
    }
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.contains("gershgorin"));
}

#[test]
fn emit_kernel_json_carries_bounds() {
    let out = lps(&["emit-kernel", "--depth", "6"]);
    let v = stdout_json(&out);
    assert_eq!(v["check"], "kernel_spectrum");
    assert_eq!(v["size"], 6);
    let lo = v["eigen_range"][0].as_f64().unwrap();
    let hi = v["eigen_range"][1].as_f64().unwrap();
    assert!(lo >= 7.0 / 60.0 - 1e-12 && hi <= 23.0 / 60.0 + 1e-12);
}

#[test]
fn usage_problems_exit_with_code_two() {
    // no command anywhere
    let out = lps(&[]);
    assert_eq!(out.status.code(), Some(2));

    // unknown config key
    let path = scratch_path("bad-config");
    std::fs::write(&path, "command=verify-semigroup\nwibble=3\n").unwrap();
    let out = lps(&["--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    // unparsable flag value
    let out = lps(&["verify-semigroup", "--depth", "three"]);
    assert_eq!(out.status.code(), Some(2));

    // library rejects the range
    let out = lps(&["verify-semigroup", "--depth", "40"]);
    assert_eq!(out.status.code(), Some(2));
}
