use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chaos-probe"));
    cmd.env_remove("CHAOS_PROBE_MEMORY_LIMIT_MB");
    cmd
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

const SWEEP: &str = r#"{
    "experiment": "phase-sweep",
    "L": 4, "periods": 2, "steps_per_period": 40, "realizations": 6, "seed": 21,
    "sweep": {"parameter": "hz", "start": 0.0, "stop": 1.0, "points": 4},
    "spectral": {"L": 7, "sector": "parity-odd"}
}"#;

#[test]
fn validate_accepts_and_rejects() {
    let dir = TempDir::new().unwrap();
    let good = write_config(dir.path(), "good.json", SWEEP);
    let out = bin().arg("validate").arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    let bad = write_config(
        dir.path(),
        "bad.json",
        r#"{"sweep": {"parameter": "mu", "values": [1]}}"#,
    );
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.parameter"));

    let typo = write_config(dir.path(), "typo.json", r#"{"periodz": 3}"#);
    assert_eq!(
        bin()
            .arg("validate")
            .arg(&typo)
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn memory_guard_can_be_raised() {
    let dir = TempDir::new().unwrap();
    let big = write_config(
        dir.path(),
        "big.json",
        r#"{"L": 16, "sweep": {"parameter": "hz", "values": [0.5]}}"#,
    );
    let out = bin().arg("validate").arg(&big).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CHAOS_PROBE_MEMORY_LIMIT_MB"));
    let out = bin()
        .arg("validate")
        .arg(&big)
        .env("CHAOS_PROBE_MEMORY_LIMIT_MB", "100000000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = TempDir::new().unwrap();
    // long-range couplings do not conserve magnetization
    let cfg = write_config(
        dir.path(),
        "leak.json",
        r#"{"experiment": "eta-sweep", "model": {"kind": "longrange"},
            "sweep": {"parameter": "ge", "values": [0.5]},
            "spectral": {"L": 6, "sector": {"magnetization": 3}}}"#,
    );
    let out = run(&cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep value 0.5"));
}

#[test]
fn unitary_trace() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "trace.json",
        r#"{"experiment": "trace", "L": 4, "periods": 3, "steps_per_period": 200,
            "realizations": 3, "probe": {"g": 0.0}}"#,
    );
    let out_dir = dir.path().join("o");
    assert!(run(&cfg, &out_dir, &[]).status.success());
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,re_r,im_r,abs_r,lambda_plus,phi\n"));
    assert!(column(&trace, "abs_r")
        .iter()
        .all(|&r| (r - 1.0).abs() < 1e-12));
    let periods = fs::read_to_string(out_dir.join("periods.csv")).unwrap();
    assert!(column(&periods, "abs_delta").iter().all(|&d| d < 1e-6));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn sweeps_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sweep.json", SWEEP);
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    assert!(run(&cfg, &a, &["--workers", "1"]).status.success());
    assert!(run(&cfg, &b, &["--workers", "4"]).status.success());
    let first = fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("sweep.csv")).unwrap());

    // the manifest doubles as a config
    assert!(run(&a.join("manifest.json"), &c, &["--workers", "2"])
        .status
        .success());
    assert_eq!(first, fs::read(c.join("sweep.csv")).unwrap());

    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 5);
    for name in ["norm_absdelta", "norm_eta"] {
        assert!(column(&text, name).iter().all(|x| (0.0..=1.0).contains(x)));
    }

    let d = dir.path().join("d");
    assert!(run(&cfg, &d, &["--seed", "22"]).status.success());
    assert_ne!(
        fs::read(a.join("sweep.csv")).unwrap(),
        fs::read(d.join("sweep.csv")).unwrap()
    );
}

#[test]
fn eta_sweep_separates_regimes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "eta.json",
        r#"{"experiment": "eta-sweep", "sweep": {"parameter": "hz", "values": [0.0, 0.5]},
            "spectral": {"L": 10, "sector": "parity-odd"}}"#,
    );
    let out = dir.path().join("o");
    assert!(run(&cfg, &out, &[]).status.success());
    let eta = column(&fs::read_to_string(out.join("sweep.csv")).unwrap(), "eta");
    assert!(eta[1] > 0.9 && eta[1] - eta[0] > 0.3, "{eta:?}");
}

#[test]
fn remaining_experiments_write_their_tables() {
    let dir = TempDir::new().unwrap();
    for (name, text, file, rows) in [
        (
            "nm",
            r#"{"experiment": "nonmarkov", "L": 4, "periods": 3, "steps_per_period": 40,
                "sweep": {"parameter": "hz", "values": [0.0, 0.5]}}"#,
            "sweep.csv",
            2,
        ),
        (
            "conv",
            r#"{"experiment": "convergence", "L": 4, "periods": 2, "steps_per_period": 20, "realizations": 10}"#,
            "convergence.csv",
            2,
        ),
        (
            "le",
            r#"{"experiment": "le", "L": 2, "periods": 1, "steps_per_period": 10, "realizations": 20}"#,
            "le.csv",
            11,
        ),
    ] {
        let cfg = write_config(dir.path(), &format!("{name}.json"), text);
        let out = dir.path().join(name);
        let res = run(&cfg, &out, &[]);
        assert!(
            res.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
        let csv = fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(csv.lines().count(), rows + 1, "{name}");
    }
}
