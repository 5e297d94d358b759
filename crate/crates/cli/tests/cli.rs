use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn csmac(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csmac"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn csmac")
}

const SMALL: &[&str] = &["--override", "field.n_s=16", "--override", "field.n_t=32"];

#[test]
fn generate_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = csmac(dir.path(), &["generate"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    assert!(lines.next().unwrap().contains("n_s=64"));
    assert_eq!(lines.count(), 64);
    assert!(dir.path().join("config.toml").exists());
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let args: Vec<&str> = ["generate", "--seed", "7"]
            .iter()
            .chain(SMALL)
            .copied()
            .collect();
        assert!(csmac(d.path(), &args).status.success());
    }
    let args: Vec<&str> = ["generate", "--seed", "8"]
        .iter()
        .chain(SMALL)
        .copied()
        .collect();
    assert!(csmac(c.path(), &args).status.success());
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("field.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn resolved_config_reproduces_run() {
    let a = tempfile::tempdir().unwrap();
    let args: Vec<&str> = ["generate", "--seed", "3"]
        .iter()
        .chain(SMALL)
        .copied()
        .collect();
    assert!(csmac(a.path(), &args).status.success());
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("config.toml");
    let out = csmac(b.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read(a.path().join("field.csv")).unwrap(),
        fs::read(b.path().join("field.csv")).unwrap()
    );
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\n\n[field]\nn_s = = 4\n").unwrap();
    let out = csmac(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn unknown_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[mac]\nk_tauu = 3\n").unwrap();
    let out = csmac(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_tauu"));
}

#[test]
fn invalid_values_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["mac.p_suff=1.5", "field.n_s=0", "nosuch.key=1"] {
        let out = csmac(dir.path(), &["generate", "--override", bad]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn simulate_small_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--override",
        "field.n_s=16",
        "--override",
        "field.n_t=32",
        "--override",
        "simulation.campaign.length=64",
        "--override",
        "mac.m_s=6",
        "--override",
        "mac.m_t=12",
    ];
    let out = csmac(dir.path(), &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("campaign_summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[0], "24");
    let windows = fs::read_to_string(dir.path().join("campaign_windows.csv")).unwrap();
    assert_eq!(windows.lines().count(), 2 + 2);
}

#[test]
fn simulate_rejects_window_overflow() {
    let dir = tempfile::tempdir().unwrap();
    let out = csmac(dir.path(), &["simulate", "--override", "field.n_t=32"]);
    assert_eq!(out.status.code(), Some(2));
}
