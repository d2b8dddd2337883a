//! End-to-end checks of the binary: exit codes, report files on disk, and
//! the promise that output bytes depend only on the config and the seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermcap"))
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process was signalled")
}

/// Sorted (file name, bytes) listing of a report directory, so two runs can
/// be compared without hard-coding every table name.
fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            let name = entry.file_name().to_string_lossy().into_owned();
            (name, fs::read(entry.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn capacity_demo_writes_report_files() {
    let out_dir = TempDir::new().unwrap();
    let out = bin()
        .arg("capacity")
        .arg("--config")
        .arg(config_path("capacity_demo.json"))
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let stdout = stdout_of(&out);
    assert!(stdout.contains("trend:"), "no trend line in: {stdout}");
    assert!(stdout.contains("wrote "), "no file listing in: {stdout}");

    let csv = fs::read_to_string(out_dir.path().join("capacity_demo_capacity.csv")).unwrap();
    assert!(
        csv.starts_with("refinement_level,n_pairs,energy_star,capacity\n"),
        "unexpected header: {csv}"
    );
    // Header plus one row per refinement level in the config.
    assert_eq!(csv.lines().count(), 4, "csv was: {csv}");

    let summary = fs::read_to_string(out_dir.path().join("capacity_demo_summary.txt")).unwrap();
    assert!(summary.starts_with("config_digest: "), "summary was: {summary}");
    assert!(summary.contains("seed: 5"), "summary was: {summary}");
}

#[test]
fn reruns_produce_byte_identical_reports() {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for dir in &dirs {
        let out = bin()
            .arg("full-battery")
            .arg("--config")
            .arg(config_path("full_battery_demo.json"))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    let first = dir_contents(dirs[0].path());
    assert!(first.len() > 1, "expected several report files");
    assert_eq!(first, dir_contents(dirs[1].path()));
}

#[test]
fn thread_count_does_not_change_reports() {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for (dir, threads) in dirs.iter().zip(["1", "2"]) {
        let out = bin()
            .arg("full-battery")
            .arg("--config")
            .arg(config_path("full_battery_demo.json"))
            .arg("--threads")
            .arg(threads)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    assert_eq!(dir_contents(dirs[0].path()), dir_contents(dirs[1].path()));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let out_dir = TempDir::new().unwrap();
    let out = bin()
        .arg("capacity")
        .arg("--config")
        .arg(config_path("capacity_demo.json"))
        .arg("--seed")
        .arg("123")
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let summary = fs::read_to_string(out_dir.path().join("capacity_demo_summary.txt")).unwrap();
    assert!(summary.contains("seed: 123"), "summary was: {summary}");
    assert!(!summary.contains("seed: 5"), "summary was: {summary}");
}

#[test]
fn out_flag_beats_env_var_which_beats_default() {
    let flag_dir = TempDir::new().unwrap();
    let env_dir = TempDir::new().unwrap();
    let out = bin()
        .arg("capacity")
        .arg("--config")
        .arg(config_path("capacity_demo.json"))
        .arg("--out")
        .arg(flag_dir.path())
        .env("THERMCAP_OUT", env_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(flag_dir.path().join("capacity_demo_summary.txt").exists());
    assert_eq!(fs::read_dir(env_dir.path()).unwrap().count(), 0);

    // Without --out the env var decides.
    let out = bin()
        .arg("capacity")
        .arg("--config")
        .arg(config_path("capacity_demo.json"))
        .env("THERMCAP_OUT", env_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(env_dir.path().join("capacity_demo_summary.txt").exists());
}

#[test]
fn mode_mismatch_is_rejected() {
    let out = bin()
        .arg("hit")
        .arg("--config")
        .arg(config_path("capacity_demo.json"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_of(&out));
    let stderr = stderr_of(&out);
    assert!(
        stderr.contains("config mode is capacity but the hit subcommand was invoked"),
        "stderr was: {stderr}"
    );
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = bin()
        .arg("capacity")
        .arg("--config")
        .arg("/no/such/config.json")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 1, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).starts_with("error: "));
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{ "mode": "capcity", "seed": -3, "gamma": -0.5, "banana": true }"#,
    )
    .unwrap();
    let out = bin()
        .arg("capacity")
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_of(&out));
    let stderr = stderr_of(&out);
    assert!(stderr.contains("problem(s):"), "stderr was: {stderr}");
    assert!(stderr.contains("unknown mode"), "stderr was: {stderr}");
    assert!(stderr.contains("banana: unknown key"), "stderr was: {stderr}");
    assert!(stderr.contains("gamma: must be >= 0"), "stderr was: {stderr}");
    // One bullet per problem, not just the first hit.
    assert!(
        stderr.matches("\n  - ").count() >= 3,
        "stderr was: {stderr}"
    );
}

#[test]
fn pair_budget_overrun_exits_three() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("tiny_budget.json");
    fs::write(
        &path,
        r#"{
            "mode": "capacity",
            "seed": 1,
            "time_set": { "kind": "interval_box", "lo": [1.0], "hi": [2.0] },
            "space_set": { "kind": "interval_box", "lo": [0.0], "hi": [1.0] },
            "gamma": 0.25,
            "refinement": {
                "time_resolutions": [0.25],
                "space_resolutions": [0.25]
            },
            "max_pairs": 4
        }"#,
    )
    .unwrap();
    let out = bin()
        .arg("capacity")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("cap is 4"), "stderr: {}", stderr_of(&out));
}

#[test]
fn zero_threads_is_rejected() {
    let out = bin()
        .arg("capacity")
        .arg("--config")
        .arg(config_path("capacity_demo.json"))
        .arg("--threads")
        .arg("0")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("--threads must be >= 1"));
}
