//! End-to-end checks of the kftrl binary: output files, determinism across
//! repeated invocations, config validation, and the audit/oracle commands.

use std::path::Path;
use std::process::Command;

fn kftrl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kftrl"))
}

fn repo_config(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn run_writes_expected_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = kftrl()
        .args(["run", "--config"])
        .arg(repo_config("smoke.json"))
        .args(["--out"])
        .arg(&out)
        .arg("--emit-buffer")
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["run.json", "regret.csv", "buffer.jsonl", "diag.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let csv = std::fs::read_to_string(out.join("regret.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "T_checkpoint,cum_regret,stderr");
    // 64 = 2^6: checkpoints 1,2,4,...,64.
    assert_eq!(lines.count(), 7);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = kftrl()
            .args(["run", "--config"])
            .arg(repo_config("smoke.json"))
            .args(["--seed", "7", "--out"])
            .arg(out)
            .arg("--emit-buffer")
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["run.json", "regret.csv", "buffer.jsonl", "diag.json"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs across identical invocations"
        );
    }
}

#[test]
fn unknown_config_keys_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut text = std::fs::read_to_string(repo_config("smoke.json")).unwrap();
    text = text.replacen("\"horizon\"", "\"not_a_field\": 1,\n    \"horizon\"", 1);
    std::fs::write(&bad, text).unwrap();
    let output = kftrl()
        .args(["run", "--config"])
        .arg(&bad)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("not_a_field"),
        "error should name the unknown key: {stderr}"
    );
}

#[test]
fn sweep_fits_a_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let output = kftrl()
        .args(["sweep", "--config"])
        .arg(repo_config("smoke.json"))
        .args([
            "--horizons",
            "16,32,64",
            "--seeds",
            "2",
            "--threads",
            "2",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(out.join("sweep.csv").exists());
    assert!(out.join("sweep.json").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["horizons"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
}

#[test]
fn quick_audit_passes() {
    let dir = tempfile::tempdir().unwrap();
    let output = kftrl()
        .args(["audit", "--quick", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "audit failed:\n{stdout}");
    assert!(stdout.contains("ftrl-solver: PASS"));
    assert!(dir.path().join("audit.json").exists());
}

#[test]
fn oracle_check_reports_tiny_error() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("oracle.json");
    let output = kftrl()
        .args([
            "oracle-check",
            "--instances",
            "200",
            "--seed",
            "5",
            "--json",
        ])
        .arg(&json)
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report["pass"].as_bool().unwrap());
    assert!(report["max_relative_error"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn continuous_config_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = kftrl()
        .args(["run", "--config"])
        .arg(repo_config("continuous.json"))
        .args(["--no-diag", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["rounds"].as_array().unwrap().len(), 128);
    // Continuous-support curves carry a Monte Carlo stderr.
    let last = record["regret_curve"]
        .as_array()
        .unwrap()
        .last()
        .unwrap()
        .clone();
    assert!(last["stderr"].as_f64().unwrap() > 0.0);
}
