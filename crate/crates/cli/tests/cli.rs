use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gibbslab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .env("GIBBSLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn verify_suite_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--seed", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("verify.csv"));
    assert_eq!(rows[0], ["check", "value", "reference", "tolerance", "passed"]);
    assert!(rows[1..].iter().all(|r| r[4] == "true"));
    let manifest = fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    for key in ["config_sha256", "seed,5", "version", "timestamp"] {
        assert!(manifest.contains(key), "{manifest}");
    }
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[lattice]\ndimension = 1\nextent = [2\n").unwrap();
    let out = run(&["exact", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn missing_config_and_bad_model_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["exact"], dir.path()).status.code(), Some(2));
    let cfg = dir.path().join("nd.toml");
    fs::write(
        &cfg,
        "[lattice]\ndimension = 1\nextent = [2]\n[interaction]\nkind = \"explicit\"\nmatrix = [[1.0, -1.2], [-1.2, 1.0]]\n[grid]\npoints = 8\n",
    )
    .unwrap();
    let out = run(&["exact", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let out = run(
        &["fit", "--input", dir.path().join("absent.csv").to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn same_seed_gives_identical_bodies() {
    let cfg = configs().join("gaussian_chain.toml");
    let cfg = cfg.to_str().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["sample", "--config", cfg, "--seed", "42"], d.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let body = |d: &tempfile::TempDir| fs::read(d.path().join("covariance.csv")).unwrap();
    assert_eq!(body(&a), body(&b));
    let c = tempfile::tempdir().unwrap();
    run(&["sample", "--config", cfg, "--seed", "43"], c.path());
    assert_ne!(body(&a), body(&c));
    let strip = |d: &tempfile::TempDir| {
        fs::read_to_string(d.path().join("manifest.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("timestamp"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn exact_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("gaussian_chain.toml");
    let out = run(
        &["exact", "--config", cfg.to_str().unwrap(), "--format", "json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("covariance.json")).unwrap())
            .unwrap();
    assert_eq!(v["columns"][3], "value");
    let c01 = v["rows"][1][3].as_f64().unwrap();
    assert!((c01 - 0.104167).abs() < 1e-4, "{c01}");
}

#[test]
fn bootstrap_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("power_law_chain.toml");
    let out = run(&["bootstrap", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let input = dir.path().join("bootstrap.csv");
    let out = run(&["fit", "--input", input.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(&dir.path().join("fit.csv"));
    let decay: f64 = rows[1][1].parse().unwrap();
    assert!(decay > 1.4 && decay < 2.1, "{decay}");
}
