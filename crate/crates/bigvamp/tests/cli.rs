use std::path::Path;
use std::process::{Command, Output};

fn bigvamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bigvamp")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn out_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = bigvamp(&["sweep", "--preset", "custom", "--snr", "10", "--n-trials", "2", "--out", out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let log = std::fs::read_to_string(dir.path().join("run.log")).unwrap();
    assert_eq!(log.lines().filter(|l| l.contains("termination=")).count(), 2);
    assert!(dir.path().join("config.toml").exists());
}

#[test]
fn negative_snr_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = bigvamp(&["compare", "--preset", "custom", "--snr=-5,5", "--n-trials", "1", "--out", out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("results.csv");
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 7);
    let cols = bigvamp(&["columns", out_arg(&csv)]);
    let text = String::from_utf8(cols.stdout).unwrap();
    assert_eq!(text.matches("# preset=custom").count(), 3);
}

#[test]
fn phase_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = bigvamp(&[
        "phase", "--preset", "matrix_completion", "--snr", "0,30", "--ranks", "1,2", "--n-trials", "1", "--out",
        out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("results.csv")).unwrap().lines().count(), 5);
}

#[test]
fn se_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = bigvamp(&["se", "--preset", "dictionary_learning", "--snr", "20", "--mode", "bigvamp", "--out", out_arg(dir.path())]);
    assert!(o.status.success());
    let se = std::fs::read_to_string(dir.path().join("se.csv")).unwrap();
    assert!(se.starts_with("snr_db,iteration,"));
    assert!(se.lines().count() > 2);
}

#[test]
fn contradictions_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "preset = \"matrix_completion\"\nchannel = \"awgn\"\n").unwrap();
    let o = bigvamp(&["sweep", "--config", out_arg(&cfg)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("conflicts with channel awgn"));
    std::fs::write(&cfg, "presett = \"custom\"\n").unwrap();
    assert!(!bigvamp(&["sweep", "--config", out_arg(&cfg)]).status.success());
}
