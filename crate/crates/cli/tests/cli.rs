//! End-to-end tests of the `loopbeam` binary: exit codes, file outputs and
//! output determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loopbeam"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("loopbeam-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn sha256_file(path: &Path) -> String {
    loopbeam::artifacts::sha256_hex(&std::fs::read(path).unwrap())
}

#[test]
fn render_writes_maps_and_is_deterministic() {
    let dir = tempdir("render");
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for out in [&out1, &out2] {
        let status = bin()
            .args(["render", "--l", "1", "--od", "1", "--grid", "96", "--format", "bin"])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["input_intensity.bin", "output_intensity.bin", "output_phase.bin", "lobes.txt"] {
        assert!(out1.join(name).exists(), "{name} missing");
        assert_eq!(sha256_file(&out1.join(name)), sha256_file(&out2.join(name)), "{name} differs");
    }
    let lobes = std::fs::read_to_string(out1.join("lobes.txt")).unwrap();
    assert!(lobes.contains("lobe_count = 2"), "{lobes}");
    // Bright lobe reported near θ = π/2.
    assert!(lobes.contains("angle_over_pi = 0.5000"), "{lobes}");
}

#[test]
fn render_rejects_bad_config_with_exit_2() {
    let dir = tempdir("badcfg");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "[probe]\nl = 1\namplitude = 0.1\nomega14 = 2\n").unwrap();
    let output = bin().args(["render", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("omega14"), "{err}");
}

#[test]
fn usage_error_exits_2() {
    let output = bin().args(["render", "--no-such-flag"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = bin().args(["spectrum", "--resolution", "0"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn berry_reports_equal_rabi_value() {
    let dir = tempdir("berry");
    let output = bin()
        .args(["berry", "--equal-rabi", "--samples", "10000"])
        .arg("--out")
        .arg(dir.join("berry"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    let wilson: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("gamma_wilson_mod_2pi = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((wilson - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-4, "{wilson}");
}

#[test]
fn protocol_recovers_gamma() {
    let dir = tempdir("protocol");
    let output = bin()
        .args(["protocol", "--c", "45deg", "--time", "400", "--steps", "40000"])
        .arg("--out")
        .arg(dir.join("p"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = String::from_utf8_lossy(&output.stdout);
    let recovered: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("recovered_gamma = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((recovered - 2.0 * std::f64::consts::PI / 3.0).abs() < 0.05, "{recovered}");
    assert!(dir.join("p/protocol.txt").exists());
}

#[test]
fn validate_subset_passes() {
    let output = bin().args(["validate", "--only", "3,7,8,9"]).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stdout));
    let text = String::from_utf8_lossy(&output.stdout);
    assert_eq!(text.matches("[PASS]").count(), 4, "{text}");
}

#[test]
fn validate_rejects_bad_ids() {
    let output = bin().args(["validate", "--only", "13"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sweep_writes_per_point_manifests() {
    let dir = tempdir("sweep");
    let status = bin()
        .args(["sweep", "--grid", "48", "--ods", "0.5", "2.0", "--phi12s", "0", "--scales", "1.0"])
        .args(["--jobs", "2", "--format", "csv"])
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let points: Vec<_> = std::fs::read_dir(&dir).unwrap().collect();
    assert_eq!(points.len(), 2);
    for p in points {
        let p = p.unwrap().path();
        assert!(p.join("manifest.toml").exists());
        assert!(p.join("output_intensity.csv").exists());
        assert!(p.join("summary.txt").exists());
    }
}
