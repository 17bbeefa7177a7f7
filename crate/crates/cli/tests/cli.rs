//! End-to-end checks of the batch runner: dispatch, schema rejection,
//! reproducibility of data files, and manifest integrity.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fraclab"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn exponent_linear_case() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command":"exponent","N":2,"s":0.75,"gamma":1,"Gamma":1,"sign":"plus"}"#,
    );
    let out = dir.path().join("run");
    let status = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("exponent.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let sigma = v["sigma"].as_f64().unwrap();
    assert!((sigma - (-0.5)).abs() < 1e-3, "sigma {sigma}");
    assert!(v["Ntilde"].as_f64().unwrap() > 1.9);
}

#[test]
fn heat_profile_cauchy_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"command":"heat","N":1,"s":0.5}"#);
    let out = dir.path().join("run");
    let status = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    let value: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 0.3183).abs() < 1e-3, "P(0,1) = {value}");
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command":"exponent","N":2,"s":0.75,"ggamma":1,"Gamma":1,"sign":"plus"}"#,
    );
    let out = dir.path().join("run");
    let output = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("ggamma"), "stderr: {stderr}");
}

#[test]
fn unknown_command_lists_registry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"command":"frobnicate"}"#);
    let out = dir.path().join("run");
    let output = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("exponent") && stderr.contains("harnack"), "stderr: {stderr}");
}

#[test]
fn reruns_are_byte_identical_and_manifest_hashes_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command":"harnack","s":0.75,"gamma":1,"Gamma":2,"M1":1,"M2":1,"count":3,"seed":42}"#,
    );
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let status = bin().arg("--config").arg(&cfg).arg("--out").arg(out).status().unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out1.join("harnack.csv")).unwrap();
    let b = std::fs::read(out2.join("harnack.csv")).unwrap();
    assert_eq!(a, b, "reruns must produce byte-identical CSV data");

    // every emitted file appears in the manifest with a matching hash
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("manifest.json")).unwrap())
            .unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for entry in outputs {
        let name = entry["path"].as_str().unwrap();
        let data = std::fs::read(out1.join(name)).unwrap();
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(&data);
        assert_eq!(format!("{:x}", h.finalize()), entry["sha256"].as_str().unwrap());
    }
}

#[test]
fn dirichlet_and_eigen_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command":"dirichlet","kernel":{"variant":"explicit","gamma":1.0,"Gamma":1.0,"s":0.75,"N":2,"multiplier":1.0},"domain":{"type":"ball","radius":1.0},"rhs":1.0}"#,
    );
    let out = dir.path().join("run");
    let status = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("dirichlet.json")).unwrap())
            .unwrap();
    assert!(v["u_at_origin"].as_f64().unwrap() > 0.0);
}
