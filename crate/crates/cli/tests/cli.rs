use std::path::PathBuf;
use std::process::{Command, Output};

fn bbk29(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbk29")).args(args).output().unwrap()
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn kalman_trace_ends_near_point_one() {
    let out = bbk29(&["kalman", "--c", "1", "--sigma2", "1", "--N", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,gamma"));
    let last = lines.last().unwrap();
    let (n, g) = last.split_once(',').unwrap();
    assert_eq!(n, "100");
    let g: f64 = g.parse().unwrap();
    assert!((g - 0.105).abs() < 5e-4, "{g}");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(bbk29(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bbk29(&[]).status.code(), Some(1));
    assert_eq!(bbk29(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_values_are_validation_errors() {
    assert_eq!(bbk29(&["kalman", "--sigma2=-1"]).status.code(), Some(2));
    assert_eq!(bbk29(&["modulus", "--arg", "3"]).status.code(), Some(2));
    assert_eq!(bbk29(&["run", "/nonexistent/config.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"predictor":{"y_bound":1},"kernel":{"kind":"rkhs_w12"},"benchmark":{"rule":"vee"},"sweep":[5,5]}"#).unwrap();
    assert_eq!(bbk29(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn run_sin_config_keeps_ratios_below_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sin_sobolev_p2.json");
    let out = bbk29(&["run", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "bound_ratio").unwrap();
    let mut rows = 0;
    for line in lines {
        let ratio: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert!(ratio <= 1.0);
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn json_output_parses() {
    let out = bbk29(&["--json", "modulus", "--kind", "rho", "--arg", "1", "--quick"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rho = v["value"].as_f64().unwrap();
    assert!((rho - (2f64.sqrt() - 1.0)).abs() < 1e-4);

    let out = bbk29(&["--json", "--seed", "4", "coverage", "--which", "filtering", "--runs", "40", "--N", "30"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["runs"].as_array().unwrap().len(), 40);
}

#[test]
fn signal_writes_path_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = bbk29(&["signal", "--kind", "diffusion", "--N", "50", "--y-bound", "2", "--noise-kind", "truncated-gaussian", "--out-dir", d]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert!(text.starts_with("n,t,theta,y\n"));
    assert_eq!(text.lines().count(), 51);
    let again = bbk29(&["signal", "--kind", "diffusion", "--N", "50", "--y-bound", "2", "--noise-kind", "truncated-gaussian"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}
