use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn phlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn summary(out: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join(name)).unwrap()).unwrap()
}

#[test]
fn verify_ly_passes_on_the_reference_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = phlab(&["skewprod", "verify-ly"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "skewprod-verify-ly.json");
    assert_eq!(s["pass"], Value::Bool(true));
    let checks = s["results"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 9);
    assert!(dir.path().join("iterates.csv").exists());
}

#[test]
fn orbit_reports_the_cat_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let o = phlab(&["orbit", "--set", "orbit.n=10000"], dir.path());
    assert!(o.status.success());
    let s = summary(dir.path(), "orbit.json");
    let golden = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let central = s["results"]["pointwise"]["central"].as_f64().unwrap();
    let unstable = s["results"]["pointwise"]["unstable"].as_f64().unwrap();
    assert!((central + golden).abs() < 1e-3 && (unstable - golden).abs() < 1e-3);
}

#[test]
fn config_file_sections_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# triangular model\n[model]\nkind = linear\nmatrix = 3,0;1,2\n\n[orbit]\nn = 100\n",
    )
    .unwrap();
    let o = phlab(&["orbit", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "orbit.json");
    let central = s["results"]["pointwise"]["central"].as_f64().unwrap();
    assert!((central - 2f64.ln()).abs() < 1e-6);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = phlab(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = phlab(&["orbit", "--set", "orbit.bogus=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("orbit.bogus"));
    assert!(!dir.path().join("orbit.json").exists());
}

#[test]
fn identical_seeds_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = phlab(
            &[
                "perturb",
                "sample",
                "--seed",
                "42",
                "--set",
                "field.grid=16",
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    for name in ["perturb-sample.json", "field.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let c = tempfile::tempdir().unwrap();
    phlab(
        &[
            "perturb",
            "sample",
            "--seed",
            "43",
            "--set",
            "field.grid=16",
        ],
        c.path(),
    );
    assert_ne!(
        fs::read(a.path().join("field.csv")).unwrap(),
        fs::read(c.path().join("field.csv")).unwrap()
    );
}
