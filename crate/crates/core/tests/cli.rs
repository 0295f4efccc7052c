mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::small_toml;

fn gsfde(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsfde"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn feasibility_of_the_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsfde(&["feasibility"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for k in ["K4", "K5", "K6", "K7", "K8", "K9", "L2"] {
        assert!(text.contains(k), "{k} missing:\n{text}");
    }
}

#[test]
fn run_one_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_toml());
    let out = gsfde(&["--config", &cfg, "--paths", "100", "--out", "o", "run", "map_bound"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("o/map_bound.csv").exists());
    assert!(dir.path().join("o/summary.txt").exists());
}

#[test]
fn run_all_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_toml());
    let out = gsfde(&["--config", &cfg, "--out", "all", "run-all"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(1), "{text}");
    assert!(text.contains("l2_estimate        FAIL"), "{text}");
    assert!(text.contains("OVERALL FAIL"));

    let enabled = "enabled = [\"ms_bound\", \"pair_convergence\", \"map_bound\", \"map_convergence\", \"lyapunov\", \"markov\", \"lemmas\", \"truncation\", \"nonexplosion\"]\n";
    let cfg = write_config(dir.path(), &format!("{}{enabled}", small_toml()));
    let out = gsfde(&["--config", &cfg, "--seed", "3", "--out", "some", "run-all"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("OVERALL PASS"));
    for f in ["bounds.csv", "summary.txt", "markov.csv", "lemmas.csv"] {
        assert!(dir.path().join("some").join(f).exists(), "{f}");
    }
}

#[test]
fn lemma_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_toml());
    let out = gsfde(&["--config", &cfg, "--out", "o", "lemma-check"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("a1_c1_max_violation"));
}

#[test]
fn infeasible_drift_exits_with_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_toml().replace("a = 2.0\nb = 0.5", "a = 0.2\nb = 0.5"));
    let out = gsfde(&["--config", &cfg, "run-all"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("lambda1"));
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_toml().replace("dim = 1", "dim = \"one\""));
    let out = gsfde(&["--config", &cfg, "feasibility"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line") && err.contains("config.toml"), "{err}");
}

#[test]
fn unknown_experiment_is_rejected_by_the_parser() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsfde(&["run", "everything"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
