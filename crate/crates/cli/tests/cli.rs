//! Black-box tests of the `percolate` binary: subcommands, overrides, and
//! exit codes (0 success, 2 config/usage, 3 stage failure).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_percolate"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn fixture_args(out: &Path) -> Vec<String> {
    vec![
        "--events".into(),
        fixture("mini_blog.ndjson").display().to_string(),
        "--lexicon".into(),
        fixture("lexicon.csv").display().to_string(),
        "--period-start".into(),
        "2008-01-01T00:00:00Z".into(),
        "--period-end".into(),
        "2008-03-01T00:00:00Z".into(),
        "--out".into(),
        out.display().to_string(),
        "--jobs".into(),
        "2".into(),
    ]
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

#[test]
fn run_on_fixture_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("run")
        .args(fixture_args(dir.path()))
        .args(["--models", "post,comment", "--k", "3"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("report_comment_k3.json").exists());
}

#[test]
fn run_with_config_file_and_k_range() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("run")
        .args([
            "--config",
            fixture("run.toml").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--models",
            "comment",
            "--k",
            "3..4",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(dir.path().join("report_comment_k3.json").exists());
    assert!(dir.path().join("report_comment_k4.json").exists());
}

#[test]
fn stages_chain_via_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    for stage in ["ingest", "build-graphs", "detect", "track", "report"] {
        let output = bin()
            .arg(stage)
            .args(fixture_args(dir.path()))
            .args(["--models", "comment", "--k", "3"])
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "stage {stage}: {}",
            stderr(&output)
        );
    }
    assert!(dir.path().join("report_comment_k3.json").exists());
}

#[test]
fn missing_events_is_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("run")
        .args([
            "--events",
            "/nonexistent/nothing.ndjson",
            "--period-start",
            "2008-01-01T00:00:00Z",
            "--period-end",
            "2008-03-01T00:00:00Z",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));
}

#[test]
fn bad_env_override_is_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("run")
        .args(fixture_args(dir.path()))
        .env("PERCOLATE_W_MIN", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));
    assert!(stderr(&output).contains("PERCOLATE_W_MIN"));
}

#[test]
fn env_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("run")
        .args(fixture_args(dir.path()))
        .args(["--models", "comment"])
        .env("PERCOLATE_K", "4")
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(dir.path().join("report_comment_k4.json").exists());
    assert!(!dir.path().join("report_comment_k3.json").exists());
}

#[test]
fn missing_upstream_stage_is_exit_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("detect")
        .args(fixture_args(dir.path()))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", stderr(&output));
    assert!(stderr(&output).contains("build-graphs"));
}

#[test]
fn compare_prints_table_and_rejects_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let run = bin()
        .arg("run")
        .args(fixture_args(dir.path()))
        .args(["--models", "post,comment", "--k", "3,4"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));

    let output = bin()
        .arg("compare")
        .arg(dir.path().join("report_post_k3.json"))
        .arg(dir.path().join("report_comment_k3.json"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let table = String::from_utf8_lossy(&output.stdout);
    assert!(table.contains("stable_group_count"));
    assert!(table.contains("delta"));

    // mismatched k -> usage error, exit 2
    let output = bin()
        .arg("compare")
        .arg(dir.path().join("report_post_k3.json"))
        .arg(dir.path().join("report_comment_k4.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stderr(&output));
}

#[test]
fn compare_json_output_parses() {
    let dir = tempfile::tempdir().unwrap();
    let run = bin()
        .arg("run")
        .args(fixture_args(dir.path()))
        .args(["--models", "post,comment", "--k", "3"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));
    let output = bin()
        .arg("compare")
        .arg("--json")
        .arg(dir.path().join("report_post_k3.json"))
        .arg(dir.path().join("report_comment_k3.json"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr(&output));
    let value: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(value["k"], 3);
}
