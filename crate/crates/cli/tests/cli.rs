use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use muxctl_cli::io::{read_csv, read_json};
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn device() -> PathBuf {
    configs().join("reference_device.json")
}

fn muxctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muxctl")).args(args).env_remove("MUXCTL_WORKERS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Copy of the reference device with `edit` applied.
fn edited_device(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(device()).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

#[test]
fn compile_bell_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bell.json");
    let o = muxctl(&["compile", "--circuit", s(&configs().join("circuits/bell.json")), "--device", s(&device()), "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (meta, v) = read_json(&out).unwrap();
    assert_eq!(meta.command, "compile");
    assert_eq!(meta.config_sha256.as_ref().unwrap().len(), 64);
    assert_eq!(v["cycles"], serde_json::json!(["one_qubit", "two_qubit", "one_qubit"]));
    assert_eq!(v["schedule"]["cz_slots"].as_array().unwrap().len(), 2);
}

#[test]
fn compile_empty_and_invalid_circuits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let c = configs().join("circuits");
    let o = muxctl(&["compile", "--circuit", s(&c.join("empty.json")), "--device", s(&device()), "-o", s(&out)]);
    assert_eq!(code(&o), 0);
    let (_, v) = read_json(&out).unwrap();
    assert!(v["cycles"].as_array().unwrap().is_empty());
    assert_eq!(v["schedule"]["total_ns"], 0.0);

    let o = muxctl(&["compile", "--circuit", s(&c.join("out_of_range.json")), "--device", s(&device()), "-o", s(&out)]);
    assert_eq!(code(&o), 2);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"num_qubits\": 2, \"gates\": [").unwrap();
    assert_eq!(code(&muxctl(&["compile", "--circuit", s(&bad), "--device", s(&device()), "-o", s(&out)])), 2);

    let missing = dir.path().join("nope.json");
    assert_eq!(code(&muxctl(&["compile", "--circuit", s(&missing), "--device", s(&device()), "-o", s(&out)])), 1);

    let uncoupled = dir.path().join("uncoupled.json");
    std::fs::write(&uncoupled, r#"{"num_qubits": 4, "gates": [{"name": "cz", "qubits": [0, 2]}]}"#).unwrap();
    let two = configs().join("two_pairs.json");
    assert_eq!(code(&muxctl(&["compile", "--circuit", s(&uncoupled), "--device", s(&two), "-o", s(&out)])), 2);
}

#[test]
fn device_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let dev = edited_device(dir.path(), "d.json", |v| v["lines"]["xy"][0]["qubits"] = serde_json::json!([0, 1, 5]));
    let o = muxctl(&["cz-spectrum", "--device", s(&dev), "--grid", "5.7e9,6.5e9,3", "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("qubit 5"));
    let dev = edited_device(dir.path(), "e.json", |v| v["couplers"][0]["pair"] = serde_json::json!([0, 0]));
    assert_eq!(code(&muxctl(&["cz-spectrum", "--device", s(&dev), "--grid", "5.7e9,6.5e9,3", "-o", s(&out)])), 2);
}

#[test]
fn leakage_map_grid_and_ideal_filter() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = muxctl(&["leakage-map", "--device", s(&device()), "--grid", "4.5e9,5.5e9", "-o", s(&out)]);
    assert_eq!(code(&o), 2);

    let dev = edited_device(dir.path(), "ideal.json", |v| {
        v["filter"] = serde_json::json!({"kind": "ideal", "bandwidth_hz": 2e7})
    });
    let o = muxctl(&["leakage-map", "--device", s(&dev), "--qubit", "q1", "--grid", "4.6e9,5.4e9,4", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (meta, t) = read_csv(&out).unwrap();
    assert!(meta.iter().any(|(k, v)| k == "command" && v == "leakage-map"));
    let l = t.column("leakage").unwrap();
    assert_eq!(l.len(), 16);
    let (lo, hi) = l.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    // no grid point falls in the passband: only the main pulse's own leakage remains
    assert!(hi < 1e-3 && hi - lo < 1e-12, "{lo} {hi}");
}

#[test]
fn resources_reports() {
    let o = muxctl(&["resources", "--qubits", "100000", "--cables", "1000", "--delta-f", "1e7", "--band", "1e9"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("feasible                    yes"));
    assert!(text.contains("-90.05 dBm"));

    let o = muxctl(&["resources", "--qubits", "100000", "--cables", "1000", "--delta-f", "1e7", "--band", "1e8"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("feasible                    no"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = muxctl(&[
        "resources", "--qubits", "100", "--cables", "1000", "--delta-f", "1e7", "--band", "1e7", "--rows", "10", "--cols",
        "10", "-o", s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let (_, v) = read_json(&out).unwrap();
    assert_eq!(v["layout"]["total"], 280);
    assert_eq!(v["scheme"], "traditional");

    assert_eq!(code(&muxctl(&["resources", "--qubits", "10", "--cables", "1", "--delta-f", "1e7"])), 2);
    assert_eq!(code(&muxctl(&["resources", "--qubits", "10", "--cables", "1", "--delta-f", "1e8", "--band", "1e7"])), 2);
}

#[test]
fn cz_spectrum_output_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (p, w) in [(&a, "1"), (&b, "3")] {
        let o = muxctl(&["--workers", w, "cz-spectrum", "--device", s(&device()), "--grid", "5.7e9,6.1e9,9", "-o", s(p)]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (_, t) = read_csv(&a).unwrap();
    let z: Vec<f64> = t.column("zeta_hz").unwrap().iter().map(|z| z.abs()).collect();
    assert!(z.windows(2).all(|w| w[0] > w[1]));
    assert!(t.column("max_separation_hz").unwrap()[0] > 10e6);
}

#[test]
fn cz_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    // hold on top of qubit 0: dressed labels are ambiguous
    let dev = edited_device(dir.path(), "res.json", |v| v["couplers"][0]["hold_hz"] = serde_json::json!(5.3e9));
    assert_eq!(code(&muxctl(&["cz-tune", "--device", s(&dev), "--target", "0.5", "-o", s(&out)])), 4);
    assert_eq!(code(&muxctl(&["cz-tune", "--device", s(&device()), "--target", "4", "-o", s(&out)])), 2);
}

#[test]
fn zero_zz_device_tunes_to_zero_without_drive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let dev = edited_device(dir.path(), "free.json", |v| {
        for k in ["g1c_hz", "g2c_hz", "g12_hz"] {
            v["couplers"][0][k] = serde_json::json!(0.0);
        }
    });
    let o = muxctl(&["cz-tune", "--device", s(&dev), "--target", "0", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, v) = read_json(&out).unwrap();
    assert_eq!(v["calibration"]["drive"]["peak_rad_s"], 0.0);
    assert!(v["check_phase_rad"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn plan_check_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let dev = edited_device(dir.path(), "j.json", |v| v["frequency_plan"]["jitter_sigma_hz"] = serde_json::json!(4e6));
    let run = |w: &str, name: &str| {
        let p = dir.path().join(name);
        let o = muxctl(&["--workers", w, "plan-check", "--device", s(&dev), "--guard-hz", "2e6", "--trials", "4000", "-o", s(&p)]);
        assert_eq!(code(&o), 0);
        std::fs::read(p).unwrap()
    };
    assert_eq!(run("1", "a.json"), run("4", "b.json"));
    let (meta, v) = read_json(&dir.path().join("a.json")).unwrap();
    assert_eq!(meta.seed, Some(7));
    assert!(v["fraction"].as_f64().unwrap() > 0.0);
}

#[test]
fn workers_env_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_muxctl"))
        .args(["resources", "--qubits", "1", "--cables", "1", "--delta-f", "1e7", "--band", "1e9"])
        .env("MUXCTL_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_muxctl"))
        .args(["resources", "--qubits", "1", "--cables", "1", "--delta-f", "1e7", "--band", "1e9"])
        .env("MUXCTL_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}
