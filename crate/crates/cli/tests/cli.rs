//! End-to-end runs of the binary against the checked-in configs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latticeq"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("latticeq-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn validate_all_checked_in_configs() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert!(
            out.status.success(),
            "validate {} failed: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn unknown_scenario_rejected() {
    let dir = tmp_dir("badname");
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, r#"{"scenario": "unknown-name", "params": {}}"#).unwrap();
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    // unknown parameter fields are schema errors too
    std::fs::write(&cfg, r#"{"scenario": "blackwell", "params": {"bogus": 1}}"#).unwrap();
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_blackwell_writes_reports() {
    let dir = tmp_dir("blackwell");
    let out = bin()
        .arg("run")
        .arg(configs_dir().join("blackwell.json"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.json", "assertions.csv", "report.json", "blackwell.csv"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["scenario"], "blackwell");
    assert_eq!(manifest["seed"], 42);
    let assertions = std::fs::read_to_string(dir.join("assertions.csv")).unwrap();
    assert!(assertions.lines().skip(1).all(|l| l.contains(",true,")));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reruns_are_byte_identical() {
    let cfg_dir = tmp_dir("det-cfg");
    let cfg = cfg_dir.join("small-mc.json");
    std::fs::write(
        &cfg,
        r#"{"scenario": "mc-perpetuity", "seed": 7,
            "params": {"samples": 20000, "xs": [2, 4], "export_samples": true, "ecdf_rows": 64}}"#,
    )
    .unwrap();
    let d1 = tmp_dir("det-1");
    let d2 = tmp_dir("det-2");
    for d in [&d1, &d2] {
        let out = bin().arg("run").arg(&cfg).arg("--out").arg(d).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["assertions.csv", "tail_vs_exact.csv", "ecdf.csv", "report.json", "samples.f64le"] {
        let a = std::fs::read(d1.join(f)).unwrap();
        let b = std::fs::read(d2.join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between reruns");
    }
    // seed override changes the samples
    let d3 = tmp_dir("det-3");
    let out = bin().arg("run").arg(&cfg).arg("--seed").arg("8").arg("--out").arg(&d3).output().unwrap();
    assert!(out.status.success());
    assert_ne!(
        std::fs::read(d1.join("samples.f64le")).unwrap(),
        std::fs::read(d3.join("samples.f64le")).unwrap()
    );
    for d in [d1, d2, d3, cfg_dir] {
        std::fs::remove_dir_all(&d).ok();
    }
}

#[test]
fn qset_accepts_target_file() {
    let dir = tmp_dir("qset-file");
    let cfg = dir.join("cfg.json");
    let target = configs_dir().join("example-target.qcsv");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"scenario": "qset-roundtrip", "seed": 3,
                "params": {{"grid_points": 48, "target_file": {:?}}}}}"#,
            target.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    // the constructed pair is exported in the wire schema
    let key = report
        .as_object()
        .unwrap()
        .keys()
        .find(|k| k.ends_with("_pair_json"))
        .expect("pair export present")
        .clone();
    assert!(report[&key]["Ab0"]["p_zero"].is_number());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn conditions_check_passes() {
    let dir = tmp_dir("conditions");
    let out = bin()
        .arg("run")
        .arg(configs_dir().join("conditions-check.json"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::remove_dir_all(&dir).ok();
}
