//! End-to-end checks of the command-line interface: flag handling, exit
//! codes, and the shape of every emitted file.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ensembles() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../ensembles")
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metexit")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// No partially written files: every emitted path is complete and no
/// temporary sibling is left behind.
fn assert_clean(dir: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        assert!(
            path.extension().map(|e| e != "tmp").unwrap_or(true),
            "stray temp file {}",
            path.display()
        );
    }
}

#[test]
fn validate_reports_rate_and_balance() {
    let out = run(&["validate", "--ensemble", ensembles().join("rate010.json").to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("design rate    1.00000000000e-1"), "{text}");
    assert!(text.contains("balanced       yes"), "{text}");
}

#[test]
fn validate_rejects_unbalanced_ensembles() {
    let dir = tmp("unbalanced");
    let path = dir.join("bad.json");
    std::fs::write(
        &path,
        r#"{
            "n_edge_types": 1,
            "n_channels": 2,
            "variable_nodes": [{"coeff": 1.0, "b": [0, 1], "d": [3]}],
            "check_nodes": [{"coeff": 0.5, "d": [5]}]
        }"#,
    )
    .unwrap();
    let out = run(&["validate", "--ensemble", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_is_a_config_error() {
    let out = run(&["validate", "--ensemble", "/nonexistent/nope.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn channel_flags_are_mutually_exclusive() {
    let reg = ensembles().join("regular_rate05.json");
    let out = run(&[
        "trace", "--ensemble", reg.to_str().unwrap(),
        "--sigma", "0.5", "--ebn0-db", "1.0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let missing = run(&["trace", "--ensemble", reg.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn malformed_sweep_is_a_config_error() {
    let reg = ensembles().join("regular_rate05.json");
    let out = run(&["threshold", "--ensemble", reg.to_str().unwrap(), "--sweep", "1:2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["threshold", "--ensemble", reg.to_str().unwrap(), "--sweep", "a:b:c"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn threshold_locates_the_regular_value_and_writes_json() {
    let dir = tmp("threshold");
    let json = dir.join("result.json");
    let out = run(&[
        "threshold",
        "--ensemble", ensembles().join("regular_rate05.json").to_str().unwrap(),
        "--grid-llr-max", "18", "--grid-bins", "513",
        "--sweep", "0.80:0.95:0.005",
        "--out", json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let sigma_line = text.lines().find(|l| l.starts_with("sigma_star")).unwrap();
    let sigma: f64 = sigma_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((sigma - 0.88).abs() / 0.88 < 0.03, "sigma_star {sigma}");

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["method"], "de");
    assert!(doc["probes"].as_array().unwrap().len() >= 4);
    assert!((doc["sigma_star"].as_f64().unwrap() - sigma).abs() < 1e-9);
    assert_clean(&dir);
}

#[test]
fn bracket_that_never_converges_exits_three() {
    let out = run(&[
        "threshold",
        "--ensemble", ensembles().join("regular_rate05.json").to_str().unwrap(),
        "--grid-llr-max", "18", "--grid-bins", "513",
        "--sweep", "1.05:1.20:0.01",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gexit_writes_charts_and_metadata() {
    let dir = tmp("gexit");
    let out = run(&[
        "gexit",
        "--ensemble", ensembles().join("regular_rate05.json").to_str().unwrap(),
        "--sigma", "0.80",
        "--grid-llr-max", "18", "--grid-bins", "513",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let combined = std::fs::read_to_string(dir.join("combined.csv")).unwrap();
    assert!(combined.starts_with("h,g,label"), "{}", &combined[..40.min(combined.len())]);
    assert!(dir.join("edge_0.csv").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["converged"], true);
    assert_eq!(meta["charts"][0]["crossed"], false);
    assert_clean(&dir);
}

#[test]
fn ebn0_flag_converts_through_the_design_rate() {
    let dir = tmp("gexit-ebn0");
    // Rate one half: Eb/N0 of 0 dB means unit SNR, which is unit sigma.
    let out = run(&[
        "gexit",
        "--ensemble", ensembles().join("regular_rate05.json").to_str().unwrap(),
        "--ebn0-db", "0",
        "--grid-llr-max", "12", "--grid-bins", "257",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json")).unwrap())
            .unwrap();
    assert!((meta["sigma"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn trace_dumps_density_snapshots() {
    let dir = tmp("trace");
    let out = run(&[
        "trace",
        "--ensemble", ensembles().join("regular_rate05.json").to_str().unwrap(),
        "--sigma", "0.50",
        "--grid-llr-max", "18", "--grid-bins", "513",
        "--snapshot-every", "3",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(meta["converged"], true);
    let files = meta["snapshots"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let body = std::fs::read_to_string(dir.join(f.as_str().unwrap())).unwrap();
        assert!(body.starts_with("llr,vn_mass,cn_mass"));
        assert_eq!(body.lines().count(), 514, "one row per bin plus header");
    }
    let pe = std::fs::read_to_string(dir.join("pe.csv")).unwrap();
    assert!(pe.starts_with("iteration,pe"));
    assert_clean(&dir);
}

#[test]
fn rates_csv_is_consistent() {
    let out = run(&["rates", "--levels", "2", "--delta", "0.5", "--sweep", "0:6:3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "snr_db,level,mi,source_rate,channel_rate,sum_mi,analytic_mi"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6, "three sweep points, two levels each");
    for pair in rows.chunks(2) {
        let sum: f64 = pair.iter().map(|r| r[2]).sum();
        assert!((sum - pair[0][5]).abs() < 1e-9, "per-level sum {sum} vs column {}", pair[0][5]);
        assert!(pair[0][5] <= pair[0][6] + 1e-6, "sum exceeds the unquantized information");
    }
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_metexit"))
        .env("METEXIT_THREADS", "zero")
        .args(["rates", "--levels", "2", "--delta", "0.5", "--sweep", "0:3:3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let ok = Command::new(env!("CARGO_BIN_EXE_metexit"))
        .env("METEXIT_THREADS", "1")
        .args(["rates", "--levels", "2", "--delta", "0.5", "--sweep", "0:3:3"])
        .output()
        .unwrap();
    assert!(ok.status.success());
}
