//! Command-line behavior: exit codes, file outputs, and the documented flows.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aktower"))
}

fn build_toy(path: &Path) {
    let status = bin()
        .args([
            "build",
            "--target",
            "cf:0,49,7",
            "--stages",
            "3",
            "--q-cap",
            "1000",
            "--precision",
            "192",
            "--out",
        ])
        .arg(path)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn build_writes_tower_and_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let out = bin()
        .args([
            "build",
            "--target",
            "series:base=10,exponents=factorial",
            "--beta",
            "0",
            "--stages",
            "3",
            "--q-cap",
            "1000000",
            "--precision",
            "256",
            "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["stages"].as_array().unwrap().len(), 3);
    assert_eq!(v["stages"][1]["q"], "100");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ii:rate"), "violations listed: {stdout}");
}

#[test]
fn build_beta_one_is_rotation_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rot.json");
    let status = bin()
        .args([
            "build",
            "--target",
            "series:base=10,exponents=factorial",
            "--beta",
            "1",
            "--stages",
            "3",
            "--out",
        ])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["stages"][2]["delta_hex"].is_null());
}

#[test]
fn strict_sqrt2_build_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let out = bin()
        .args([
            "build",
            "--target",
            "cf:1,2,2,2",
            "--mode",
            "strict",
            "--stages",
            "2",
            "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("not verifiably Liouville"),
        "diagnostic: {err}"
    );
}

#[test]
fn usage_errors_exit_two() {
    // unknown target scheme
    let out = bin()
        .args(["build", "--target", "bogus:1", "--out", "/tmp/never.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // missing tower file
    let out = bin()
        .args(["dim", "--tower", "/nonexistent/tower.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // clap-level usage error
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_dim_rotnum_flow() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    build_toy(&path);
    // eval h on a grid
    let out = bin()
        .args(["eval", "--map", "h", "--stage", "3", "--grid", "8", "--tower"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("x,value"));
    assert_eq!(stdout.lines().count(), 9);
    // eval f at a rational point
    let out = bin()
        .args(["eval", "--map", "f", "--stage", "3", "--x", "1/4", "--tower"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    // dim: CSV + covering CSV + JSON summary with ordering check
    let csv = dir.path().join("rows.csv");
    let cover = dir.path().join("cover.csv");
    let json = dir.path().join("summary.json");
    let out = bin()
        .args(["dim", "--points", "40", "--seed", "3", "--tower"])
        .arg(&path)
        .arg("--out-csv")
        .arg(&csv)
        .arg("--out-cover")
        .arg(&cover)
        .arg("--out")
        .arg(&json)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("x,r,scale,delta_h,ratio,flagged"));
    let cover_text = std::fs::read_to_string(&cover).unwrap();
    assert!(cover_text.starts_with("set,eps,count"));
    assert!(cover_text.contains("G_2,"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["summary"]["ordering_ok"], true);
    // deterministic given the seed
    let json2 = dir.path().join("summary2.json");
    let out = bin()
        .args(["dim", "--points", "40", "--seed", "3", "--tower"])
        .arg(&path)
        .arg("--out")
        .arg(&json2)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(&json).unwrap(),
        std::fs::read_to_string(&json2).unwrap()
    );
    // rotnum stays under the 1/N bar
    let out = bin()
        .args(["rotnum", "--iters", "5000", "--points", "4", "--tower"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn verify_detects_tampered_stage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    build_toy(&path);
    // verify passes on the fresh tower
    let out = bin()
        .args(["verify", "--samples", "40", "--tower"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "fresh verify failed: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    // tamper with s_2 (keep it a unit fraction so the file still loads)
    let text = std::fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["stages"][1]["s"], "1/98");
    v["stages"][1]["s"] = serde_json::json!("1/96");
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let out = bin()
        .args(["verify", "--samples", "40", "--tower"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("FAIL stage-rationals:n=2"),
        "named invariant missing: {stdout}"
    );
}

#[test]
fn precision_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let status = bin()
        .env("AKTOWER_PRECISION", "320")
        .args([
            "build",
            "--target",
            "rat:1/3",
            "--stages",
            "2",
            "--out",
        ])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["config"]["precision"], 320);
}
