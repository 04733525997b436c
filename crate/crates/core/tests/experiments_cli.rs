use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use phaselift::experiments::{run, run_to_dir, ExperimentConfig};

const SMALL: &str = r#"{
  "experiment": "recover-1d",
  "shape": [8],
  "mask_counts": [3, 4],
  "max_iters": 60,
  "continuation_rounds": 3,
  "trials": 3,
  "seed": 11
}"#;

const NOISY: &str = r#"{
  "experiment": "noise-sweep",
  "shape": [8],
  "mask_kind": "gaussian-complex",
  "mask_counts": [4],
  "noise": "gaussian",
  "snr_levels_db": [20, 40],
  "max_iters": 40,
  "trials": 2,
  "seed": 5
}"#;

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phaselift"))
}

#[test]
fn reruns_are_byte_identical() {
    for text in [SMALL, NOISY] {
        let config = ExperimentConfig::from_json(text).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_to_dir(&config, a.path(), 1).unwrap();
        run_to_dir(&config, b.path(), 1).unwrap();
        for file in ["report.json", "trials.csv"] {
            assert_eq!(read(a.path(), file), read(b.path(), file), "{file}");
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let config = ExperimentConfig::from_json(SMALL).unwrap();
    let one = run(&config, 1).unwrap().report;
    let two = run(&config, 2).unwrap().report;
    assert_eq!(one, two);
}

#[test]
fn seed_changes_results() {
    let config = ExperimentConfig::from_json(NOISY).unwrap();
    let other = ExperimentConfig { seed: 6, ..config.clone() };
    let a = run(&config, 1).unwrap().report;
    let b = run(&other, 1).unwrap().report;
    assert_ne!(a.trials[0].relative_mse, b.trials[0].relative_mse);
}

/// Recomputes per-group means straight from the CSV text.
#[test]
fn aggregates_match_rows() {
    let config = ExperimentConfig::from_json(NOISY).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_to_dir(&config, dir.path(), 1).unwrap();

    let mut reader = csv::Reader::from_path(dir.path().join("trials.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (level, mse, snr) = (col("snr_target_db"), col("relative_mse"), col("snr_db"));
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut rows = 0;
    for row in reader.records() {
        let row = row.unwrap();
        rows += 1;
        groups
            .entry(row[level].to_string())
            .or_default()
            .push((row[mse].parse().unwrap(), row[snr].parse().unwrap()));
    }
    assert_eq!(rows, config.trials * config.mask_counts.len() * config.snr_levels_db.len());

    let json: serde_json::Value = serde_json::from_slice(&read(dir.path(), "report.json")).unwrap();
    let aggregates = json["aggregates"].as_array().unwrap();
    assert_eq!(aggregates.len(), groups.len());
    for a in aggregates {
        let key = format!("{:.1}", a["snr_target_db"].as_f64().unwrap());
        let rows = &groups[&key];
        let n = rows.len() as f64;
        let mean_mse = rows.iter().map(|r| r.0).sum::<f64>() / n;
        let mean_snr = rows.iter().map(|r| r.1).sum::<f64>() / n;
        assert!((a["mean_mse"].as_f64().unwrap() - mean_mse).abs() <= 1e-12 * mean_mse.abs().max(1e-300));
        assert!((a["mean_snr_db"].as_f64().unwrap() - mean_snr).abs() <= 1e-9);
        assert_eq!(a["count"].as_u64().unwrap() as usize, rows.len());
    }
    assert_eq!(report.fits.len(), 1);
    assert!(json["config"].is_object());
    assert!(json["version"].as_str().unwrap().starts_with("phaselift "));
    assert!(json["rng"].as_str().unwrap().contains("ChaCha"));
}

#[test]
fn cli_runs_demo_deterministically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = bin()
            .args(["demo", "constructive", "--threads", "1", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("unique"));
    }
    for file in ["report.json", "trials.csv"] {
        assert_eq!(read(a.path(), file), read(b.path(), file));
    }
    assert!(a.path().join("timing.json").exists());

    let json: serde_json::Value = serde_json::from_slice(&read(a.path(), "report.json")).unwrap();
    for t in json["trials"].as_array().unwrap() {
        assert!(t["relative_mse"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment": "recover-1d", "shape": [0]}"#).unwrap();
    assert_eq!(bin().arg("run").arg(&bad).status().unwrap().code(), Some(2));
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(bin().arg("run").arg(&bad).status().unwrap().code(), Some(2));
    assert_eq!(bin().args(["demo", "no-such-demo"]).status().unwrap().code(), Some(2));
    let listed = bin().args(["demo", "--list"]).output().unwrap();
    assert!(String::from_utf8_lossy(&listed.stdout).lines().any(|l| l == "noise-sweep"));
}
