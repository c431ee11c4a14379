use std::path::Path;
use std::process::{Command, Output};

use sac_core::spectral::{hr_norm, OperatorSpectrum, SpectralVector};

fn sac(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sac"));
    cmd.args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SPDE_SEED")
        .env_remove("SPDE_OUT");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

const SMALL: &str = r#"{
  "discretization": { "M": 16, "N": 8 },
  "study": {
    "m_grid": [2, 4, 8], "n_grid": [1, 2, 4], "m_ref": 64, "n_ref": 8, "paths": 6, "seed": 3,
    "tape": { "m_master": 64, "n_master": 8 }, "trials": 50
  }
}"#;

#[test]
fn heat_errors_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "h.json",
        r#"{"study": {"m_grid": [1, 8], "n_grid": [4, "all"]}}"#,
    );
    let out = sac(&["heat-errors"], Some(&cfg), &dir.path().join("o"));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("o/heat_errors.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 4);
    let all: Vec<&&str> = rows.iter().filter(|l| l.contains(",all,")).collect();
    assert_eq!(all.len(), 2);
    assert!(all.iter().all(|l| l.contains("temporal")));
}

#[test]
fn default_heat_grid_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = sac(&["heat-errors"], None, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("heat_errors.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 7 * 7 * 3);
}

#[test]
fn simulate_writes_recomputable_indicators() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", SMALL);
    let out = sac(&["simulate"], Some(&cfg), dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,mode_index,Y_coeff,O_coeff,indicator"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 17 * 8);
    let spec = OperatorSpectrum::new(1.0).unwrap();
    let chi = 0.2 / 3.0 - 1.0 / 18.0;
    for step in rows.chunks(8) {
        let y: Vec<f64> = step.iter().map(|r| r[2].parse().unwrap()).collect();
        let o: Vec<f64> = step.iter().map(|r| r[3].parse().unwrap()).collect();
        let norm = hr_norm(&SpectralVector::new(y).unwrap(), 0.2, &spec)
            + hr_norm(&SpectralVector::new(o).unwrap(), 0.2, &spec);
        let expected = norm <= 16f64.powf(chi);
        assert!(step
            .iter()
            .all(|r| r[4].parse::<u8>().unwrap() == expected as u8));
    }
    assert_eq!(
        std::fs::metadata(dir.path().join("tape_header.bin"))
            .unwrap()
            .len(),
        40
    );
}

#[test]
fn converge_is_byte_reproducible_and_respects_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let a = sac(&["converge"], Some(&cfg), &dir.path().join("a"));
    let b = sac(&["converge"], Some(&cfg), &dir.path().join("b"));
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(b.status.code(), Some(0));
    for f in ["errors.csv", "rates.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    let seeded = Command::new(env!("CARGO_BIN_EXE_sac"))
        .args(["converge", "--config"])
        .arg(&cfg)
        .env("SPDE_OUT", dir.path().join("e"))
        .env("SPDE_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(seeded.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("e/errors.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",99")), "{csv}");
    assert_ne!(
        csv,
        std::fs::read_to_string(dir.path().join("a/errors.csv")).unwrap()
    );
}

#[test]
fn single_path_reports_na() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = sac(&["converge", "--paths", "1"], Some(&cfg), dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",NA,")), "{csv}");
}

#[test]
fn check_passes_all_audits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.json", SMALL);
    let out = sac(&["check"], Some(&cfg), dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 7);
    assert!(dir.path().join("check.csv").exists());
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("bad.json", "{ not json"),
        ("unknown.json", r#"{"model": {"T": 1.0, "colour": 3}}"#),
        ("gamma.json", r#"{"discretization": {"gamma": 0.3}}"#),
        ("coeff.json", r#"{"model": {"a": [0, 1, 0, 1]}}"#),
        (
            "order.json",
            r#"{"study": {"m_grid": [1024], "m_ref": 2048}}"#,
        ),
    ];
    for (name, json) in cases {
        let cfg = write_config(dir.path(), name, json);
        let out_dir = dir.path().join(name.replace(".json", ""));
        let cmd = if name == "order.json" || name == "gamma.json" {
            "converge"
        } else {
            "simulate"
        };
        let out = sac(&[cmd], Some(&cfg), &out_dir);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out_dir.exists(), "{name} left output behind");
    }
    let out = sac(
        &["simulate"],
        Some(&dir.path().join("missing.json")),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let out = sac(&["converge", "--threads", "0"], None, dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_sac"))
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
