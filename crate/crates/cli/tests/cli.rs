//! End-to-end tests driving the compiled binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockmet"))
        .args(args)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary should execute")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

/// All files in a directory as (name, bytes), sorted by name.
fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|x, y| x.0.cmp(&y.0));
    entries
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), r#"{"N": 3, "shots": 20000, "seed": 9}"#);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let out_c = tmp.path().join("c");

    for out in [&out_a, &out_b] {
        let res = run(&[
            "fringe",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    }
    assert_eq!(dir_snapshot(&out_a), dir_snapshot(&out_b));

    // A different seed must change the sampled scan.
    let res = run(&[
        "fringe",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_c.to_str().unwrap(),
        "--seed",
        "10",
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));
    let scan_a = fs::read(out_a.join("fringe_scan.csv")).unwrap();
    let scan_c = fs::read(out_c.join("fringe_scan.csv")).unwrap();
    assert_ne!(scan_a, scan_c);
}

#[test]
fn zero_photon_number_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), r#"{"ns": [0]}"#);
    let res = run(&[
        "wigner",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(stderr_of(&res).contains("photon numbers must be >= 1"));

    let config = write_config(tmp.path(), r#"{"N": 0}"#);
    let res = run(&[
        "fringe",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("out2").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(stderr_of(&res).contains("N must be >= 1"));
}

#[test]
fn unknown_config_keys_are_rejected_before_computing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(tmp.path(), r#"{"schema_version": 1, "bogus": 3}"#);
    let res = run(&[
        "fringe",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(stderr_of(&res).contains("unknown field"));
    // Nothing besides the directory itself may have been produced.
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn ideal_n6_fringe_recovers_the_heisenberg_point() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = run(&["fringe", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));

    let precision: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fringe_precision.json")).unwrap())
            .unwrap();
    assert_eq!(precision["N"], 6);
    let delta = precision["delta_theta"].as_f64().unwrap();
    assert!((delta * 6.0 - 1.0).abs() < 1e-6, "delta = {delta}");

    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fringe_fit.json")).unwrap()).unwrap();
    assert!((fit["A"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((fit["B"].as_f64().unwrap() - 0.5).abs() < 1e-9);

    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("config_resolved.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["command"], "fringe");
    assert_eq!(resolved["config"]["N"], 6);
}

#[test]
fn hybrid_scheme_rejects_decoherence() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), r#"{"N": 2, "scheme": "hybrid", "kappa": 1e4}"#);
    let res = run(&[
        "fringe",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(stderr_of(&res).contains("not supported for the hybrid scheme"));
}

#[test]
fn optimize_reports_both_detectors_with_expected_ordering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        r#"{"ns": [2], "detectors": ["binary", "number_resolving"]}"#,
    );
    let res = run(&[
        "optimize",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", stderr_of(&res));

    let results: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("optimize_results.json")).unwrap())
            .unwrap();
    let results = results.as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["detector"], "binary");
    assert_eq!(results[1]["detector"], "number_resolving");
    let binary = results[0]["precision"].as_f64().unwrap();
    let resolving = results[1]["precision"].as_f64().unwrap();
    // Counting every photon number cannot be worse than thresholding one.
    assert!(resolving <= binary + 1e-12);
    // Both schemes beat the shot-noise limit 1/sqrt(2) here.
    assert!(binary < 1.0 / 2.0_f64.sqrt());
}
