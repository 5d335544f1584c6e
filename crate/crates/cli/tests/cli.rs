use std::path::Path;
use std::process::{Command, Output};

fn jamiton(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jamiton"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn jamiton")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn unknown_subcommand_is_usage_error_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = jamiton(dir.path(), &["frobnicate", "--out-prefix", "x"]);
    assert_eq!(out.status.code(), Some(64));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"));
    assert!(stderr.contains("simulate"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn manifests_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["fd", "--preset", "pw2", "--mode", "aggregate", "--families", "6", "--lengths", "3", "--phases", "4"];
    for dir in [&a, &b] {
        let out = jamiton(dir.path(), &args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read(a.path(), "out/fd_manifest.json"), read(b.path(), "out/fd_manifest.json"));
    assert_eq!(read(a.path(), "out/fd.svg"), read(b.path(), "out/fd.svg"));
}

#[test]
fn maximal_fd_segments_span_the_unstable_band() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["fd", "--preset", "arz1", "--mode", "maximal", "--out-prefix", "m"][..],
        &["stability", "--preset", "arz1", "--out-prefix", "s"][..],
    ] {
        let out = jamiton(dir.path(), args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let segments = csv_rows(&read(dir.path(), "m_segments.csv"));
    assert!(!segments.is_empty());
    let bands = read(dir.path(), "s_bands.csv");
    let unstable: Vec<f64> = bands
        .lines()
        .find(|l| l.ends_with(",false"))
        .unwrap()
        .split(',')
        .take(2)
        .map(|x| x.parse().unwrap())
        .collect();
    let lo = segments.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let hi = segments.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    assert!(lo >= unstable[0] - 1e-6 && hi <= unstable[1] + 1e-6, "{lo}..{hi} vs {unstable:?}");
    assert!(hi - lo > 0.9 * (unstable[1] - unstable[0]));
    // Q = m + s rho at both ends of each segment, in table units
    for r in &segments {
        let (m, s) = (r[1], r[2]);
        for (rho, q) in [(r[3], r[4]), (r[5], r[6])] {
            assert!((m + s * rho - q).abs() <= 1e-9 * q.abs().max(1.0), "{r:?}");
        }
    }
}

#[test]
fn bad_model_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"family":"PW","u_max":20,"rho_max":0.2,"tau":5,"velocity":{"type":"linear"},"pressure":{"type":"power","beta":1,"gamma":-1}}"#,
    )
    .unwrap();
    let out = jamiton(dir.path(), &["validate", "--model", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());

    let out = jamiton(dir.path(), &["simulate", "--amplitude", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = jamiton(dir.path(), &["jamiton", "--preset", "pw1", "--rho-s", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), r#"{"preset":"pw2","samples":40,"out_prefix":"cfg/j"}"#).unwrap();
    let out = jamiton(dir.path(), &["jamiton", "--config", "run.json", "--samples", "32"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "cfg/j_manifest.json")).unwrap();
    assert_eq!(manifest["parameters"]["model"], "preset:pw2");
    assert_eq!(manifest["parameters"]["samples"], 32);
    assert_eq!(read(dir.path(), "cfg/j_profile.csv").lines().count(), 33);
}

#[test]
fn ingest_then_overlay() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("loop.csv"),
        "time,vehicles,occ\n0,10,0.05\n30,14,0.12\n60,,0.1\n90,9,-0.2\n",
    )
    .unwrap();
    let out = jamiton(
        dir.path(),
        &["ingest", "--csv", "loop.csv", "--interval", "30", "--t-col", "time", "--count-col", "vehicles",
          "--occupancy-col", "occ", "--out", "pts.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let points = csv_rows(&read(dir.path(), "pts.csv"));
    assert_eq!(points.len(), 2);
    assert!((points[0][0] - 10.0).abs() < 1e-9 && (points[0][1] - 1200.0).abs() < 1e-9);
    let rejects = read(dir.path(), "pts_rejects.csv");
    assert_eq!(rejects.lines().count(), 3);
    assert!(rejects.contains("4,") && rejects.contains("5,"));

    assert!(jamiton(dir.path(), &["fd", "--mode", "maximal"]).status.success());
    let out = jamiton(dir.path(), &["overlay", "--fd-prefix", "out/fd", "--points", "pts.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cov: serde_json::Value = serde_json::from_str(&read(dir.path(), "out/overlay_coverage.json")).unwrap();
    assert_eq!(cov["total"], 2);
    assert!(read(dir.path(), "out/overlay_overlay.svg").starts_with("<svg"));
}
