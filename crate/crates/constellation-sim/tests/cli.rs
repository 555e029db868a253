//! CLI surface tests, driven through the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_constellation-sim"))
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

/// A small two-satellite config so CLI runs stay fast.
fn small_config(dir: &Path) -> PathBuf {
    let text = r#"{
        "scenario_id": 2,
        "satellite_count": 2,
        "duration_s": 1800.0,
        "orbit": { "altitude_km": 450.0, "inclination_deg": 97.4 },
        "tiles": { "tile_size": 16, "tiles_per_shard": 20, "eval_tiles": 4 }
    }"#;
    let path = dir.join("small.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_config_echoes_effective_scenario() {
    let out = bin()
        .args(["validate-config"])
        .arg(scenario_path("scenario1.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("\"satellite_count\": 8"));
    assert!(text.contains("\"altitude_km\": 786.0"));
    assert!(text.contains("\"inclination_deg\": 98.6"));
}

#[test]
fn validate_config_fills_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("minimal.json");
    std::fs::write(
        &path,
        r#"{ "scenario_id": 1, "orbit": { "altitude_km": 786.0, "inclination_deg": 98.6 } }"#,
    )
    .unwrap();
    let out = bin().arg("validate-config").arg(&path).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("\"dt_s\": 10.0"));
}

#[test]
fn validate_config_names_bad_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{ "scenario_id": 1, "orbit": { "altitude_km": -10.0, "inclination_deg": 98.6 } }"#,
    )
    .unwrap();
    let out = bin().arg("validate-config").arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("orbit.altitude_km"), "{}", stderr(&out));
}

#[test]
fn run_writes_artifacts_and_respects_duration_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg("--scenario")
        .arg(&cfg)
        .args(["--duration-hours", "0.25", "--seed", "7"])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    for file in ["events.jsonl", "timeseries.csv", "summary.json"] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    // Max timeseries t stays within the 900 s override.
    let csv = std::fs::read_to_string(out_dir.join("timeseries.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let t: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(t <= 900.0);
    }

    // Same invocation twice: byte-identical artifacts.
    let out_dir2 = dir.path().join("out2");
    let out = bin()
        .arg("run")
        .arg("--scenario")
        .arg(&cfg)
        .args(["--duration-hours", "0.25", "--seed", "7"])
        .arg("--out")
        .arg(&out_dir2)
        .output()
        .unwrap();
    assert!(out.status.success());
    for file in ["events.jsonl", "summary.json", "timeseries.csv"] {
        let a = std::fs::read(out_dir.join(file)).unwrap();
        let b = std::fs::read(out_dir2.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn run_rejects_invalid_config_without_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{ "scenario_id": 9, "orbit": { "altitude_km": 786.0, "inclination_deg": 98.6 } }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg("--scenario")
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out_dir.exists(), "partial artifacts were written");
}

#[test]
fn verify_accepts_untouched_and_rejects_tampered_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    assert!(bin()
        .arg("run")
        .arg("--scenario")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap()
        .status
        .success());

    let ok = bin().arg("verify").arg("--out").arg(&out_dir).output().unwrap();
    assert!(ok.status.success(), "{}", stderr(&ok));

    // Tamper: drop the last event.
    let events = out_dir.join("events.jsonl");
    let text = std::fs::read_to_string(&events).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    std::fs::write(&events, lines[..lines.len() - 1].join("\n") + "\n").unwrap();
    let bad = bin().arg("verify").arg("--out").arg(&out_dir).output().unwrap();
    assert!(!bad.status.success());
}

#[test]
fn plot_renders_four_svgs_even_for_empty_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    assert!(bin()
        .arg("run")
        .arg("--scenario")
        .arg(&cfg)
        .args(["--duration-hours", "0"])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap()
        .status
        .success());
    let out = bin().arg("plot").arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let plots = out_dir.join("plots");
    for name in [
        "loss_vs_time.svg",
        "soc_vs_time.svg",
        "temperature_vs_time.svg",
        "exchange_timeline.svg",
    ] {
        let text = std::fs::read_to_string(plots.join(name)).unwrap();
        assert!(!text.is_empty());
        assert!(text.starts_with("<svg"));
    }
    // The SoC plot carries the standby threshold reference line.
    let soc = std::fs::read_to_string(plots.join("soc_vs_time.svg")).unwrap();
    assert!(soc.contains("standby threshold 0.2"));
}

#[test]
fn plot_requires_run_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("plot").arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing artifact"));
}

#[test]
fn export_tiles_writes_arrays_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["export-tiles", "--seed", "5", "--count", "3", "--shard", "1", "--tile-size", "32"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("tiles.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["count"], 3);
    assert_eq!(sidecar["tile_size"], 32);
    let bands = std::fs::read(dir.path().join("bands.bin")).unwrap();
    assert_eq!(bands.len(), 3 * 3 * 32 * 32 * 8);
    let masks = std::fs::read(dir.path().join("masks.bin")).unwrap();
    assert_eq!(masks.len(), 3 * 32 * 32);
    let ndwi = std::fs::read(dir.path().join("ndwi.bin")).unwrap();
    assert_eq!(ndwi.len(), 3 * 32 * 32 * 8);
}
