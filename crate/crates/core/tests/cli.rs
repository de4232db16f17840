use std::path::Path;
use std::process::{Command, Output};

use ewqof_core::experiment::{read_results, MANIFEST_FILE, PLOT_DIR, RESULTS_FILE};

fn ewqof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ewqof")).args(args).env_remove("EWQOF_OUT_DIR").output().expect("spawn ewqof")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration_slotframes = 60\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = ewqof(&["run", "--config", &cfg, "--nodes", "15", "--seed", "4", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [RESULTS_FILE, MANIFEST_FILE, "reports/n15_ewqof_s4.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
}

#[test]
fn sweep_produces_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration_slotframes = 30\n");
    let out = dir.path().join("sweep");
    let o = ewqof(&["sweep", "--config", &cfg, "--seeds", "1..10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_results(&out.join(RESULTS_FILE)).unwrap();
    assert_eq!(rows.len(), 100);
    assert!(read(&out.join(MANIFEST_FILE)).contains("complete = true"));
    assert!(out.join(PLOT_DIR).join("throughput.csv").is_file());
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env_out");
    let o = Command::new(env!("CARGO_BIN_EXE_ewqof"))
        .args(["scenario", "--name", "line3"])
        .env("EWQOF_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join(RESULTS_FILE).is_file());
}

#[test]
fn fig1a_scenario_separates_the_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1a");
    let o = ewqof(&["scenario", "--name", "fig1a", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_results(&out.join(RESULTS_FILE)).unwrap();
    let swaps = |s: &str| rows.iter().find(|r| r.strategy.as_str() == s).unwrap().total_swaps;
    assert_eq!(swaps("ewqof"), 0);
    assert!(swaps("maxqof") >= 1);
}

#[test]
fn validate_rejects_short_window_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k = 3\n");
    let o = ewqof(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("k:"));
}

#[test]
fn validate_accepts_defaults() {
    let o = ewqof(&["validate"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));
}

#[test]
fn unknown_keys_and_scenarios_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "nodes = 5\n");
    assert_eq!(ewqof(&["validate", "--config", &cfg]).status.code(), Some(2));
    assert!(!ewqof(&["scenario", "--name", "fig9"]).status.success());
}

#[test]
fn topology_size_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration_slotframes = 20\n[topology]\npositions = [[0.0, 0.0], [10.0, 0.0]]\n");
    let out = dir.path().join("fixed");
    let o = ewqof(&["run", "--config", &cfg, "--nodes", "2", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = ewqof(&["run", "--config", &cfg, "--nodes", "3", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("topology.positions"));
}
