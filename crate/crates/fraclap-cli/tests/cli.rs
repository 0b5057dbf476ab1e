//! End-to-end tests of the fraclap binary: exit codes, report schema,
//! and determinism across FRACLAP_THREADS settings.

use std::path::PathBuf;
use std::process::{Command, Output};

use fraclap_cli::Report;

fn fraclap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fraclap"))
}

fn run_ok(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = fraclap();
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn fraclap");
    assert!(
        out.status.success(),
        "fraclap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn extend_quad_constant_reports_value() {
    let out = run_ok(
        &[
            "extend-quad",
            "--function",
            "const:c=3",
            "--s",
            "0.4",
            "--point",
            "0,1",
        ],
        &[],
    );
    let report: Report = serde_json::from_slice(&out.stdout).expect("valid report JSON");
    assert_eq!(report.results.len(), 1);
    assert!((report.results[0].value - 3.0).abs() < 1e-8);
    assert!(!report.version.is_empty());
}

#[test]
fn consistency_cosine_reports_agreement() {
    let out = run_ok(
        &[
            "consistency",
            "--function",
            "cos:xi=1",
            "--s",
            "0.5",
            "--point",
            "0",
            "--samples",
            "50000",
            "--seed",
            "3",
        ],
        &[],
    );
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    let row = &report.results[0];
    assert!((row.value - 1.0).abs() < 1e-6, "pv {}", row.value);
    assert!(row.err.unwrap() <= 1e-2, "discrepancy {:?}", row.err);
}

#[test]
fn report_round_trips_and_revalidates() {
    let out = run_ok(
        &["pv", "--function", "gauss", "--s", "0.3", "--point", "0.5"],
        &[],
    );
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    report.config.validate().expect("echoed config re-validates");
    // serialize again and reparse
    let text = serde_json::to_string(&report).unwrap();
    let _: Report = serde_json::from_str(&text).unwrap();
}

#[test]
fn validation_failure_exits_one() {
    // s outside (0, 1)
    let out = fraclap()
        .args(["pv", "--function", "gauss", "--s", "1.5", "--point", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config error"), "{err}");
    // machine-readable error object on the last stderr line
    let obj: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(obj["error"]["kind"], "config");

    // unknown registry label lists the available entries
    let out = fraclap()
        .args(["pv", "--function", "bump", "--s", "0.5", "--point", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rational"), "{err}");

    // bad config JSON gets a line-precise message
    let dir = tempdir();
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, "{\"mode\": \"pv\",\n  \"s\": oops\n}").unwrap();
    let out = fraclap()
        .args(["pv", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn numerical_failure_exits_two() {
    // A bare closure can't reach 1e-13 on the singular integral; the
    // registry cosine can, but an impossible budget on a bounded-tail
    // function cannot.
    let out = fraclap()
        .args([
            "pv",
            "--function",
            "rational",
            "--s",
            "0.9",
            "--point",
            "0",
            "--tol",
            "1e-15",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("numerical"), "{err}");
    let obj: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(obj["error"]["kind"], "numerical");
}

#[test]
fn csv_output_with_json_sidecar() {
    let dir = tempdir();
    let csv_path = dir.join("panel.csv");
    run_ok(
        &[
            "extend-quad",
            "--function",
            "gauss",
            "--s",
            "0.5",
            "--point",
            "0,1",
            "--point",
            "0.5,0.5",
            "--format",
            "csv",
            "--out",
            csv_path.to_str().unwrap(),
        ],
        &[],
    );
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,y,value,err");
    assert_eq!(lines.count(), 2);
    let sidecar = dir.join("panel.csv.json");
    let report: Report =
        serde_json::from_str(&std::fs::read_to_string(&sidecar).unwrap()).unwrap();
    // CSV decimals round-trip to the exact doubles of the report
    let row1: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row1[2].parse::<f64>().unwrap(), report.results[0].value);
}

#[test]
fn seed_determinism_across_thread_env() {
    let args = [
        "extend-mc",
        "--function",
        "gauss",
        "--s",
        "0.4",
        "--point",
        "0.5,0.8",
        "--samples",
        "200000",
        "--seed",
        "314159",
    ];
    let one = run_ok(&args, &[("FRACLAP_THREADS", "1")]);
    let four = run_ok(&args, &[("FRACLAP_THREADS", "4")]);
    let r1: Report = serde_json::from_slice(&one.stdout).unwrap();
    let r4: Report = serde_json::from_slice(&four.stdout).unwrap();
    assert_eq!(
        r1.results[0].value.to_bits(),
        r4.results[0].value.to_bits(),
        "means must be bit-identical across thread counts"
    );
    assert_eq!(
        r1.results[0].stderr.unwrap().to_bits(),
        r4.results[0].stderr.unwrap().to_bits()
    );
    // and byte-identical numeric fields on repeated identical runs
    let again = run_ok(&args, &[("FRACLAP_THREADS", "4")]);
    let r4b: Report = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(
        serde_json::to_string(&r4.results).unwrap(),
        serde_json::to_string(&r4b.results).unwrap()
    );
}

#[test]
fn validate_mode_reports_per_check_lines() {
    let out = run_ok(&["validate", "--quick", "--seed", "11"], &[]);
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.results.len() >= 15, "{} checks", report.results.len());
    assert!(report.results.iter().all(|r| r.value == 1.0));
    // one PASS/FAIL line per check on stderr
    let err = String::from_utf8_lossy(&out.stderr);
    let pass_lines = err.lines().filter(|l| l.starts_with("PASS ")).count();
    assert_eq!(pass_lines, report.results.len(), "{err}");
}

#[test]
fn bad_thread_env_is_config_error() {
    let out = fraclap()
        .args([
            "extend-mc",
            "--function",
            "gauss",
            "--s",
            "0.4",
            "--point",
            "0,1",
            "--samples",
            "100",
        ])
        .env("FRACLAP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

fn tempdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "fraclap-test-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
