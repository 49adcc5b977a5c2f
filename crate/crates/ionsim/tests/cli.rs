use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_ionsim");

const FOUR_ION: &str = r#"seed = 3
[trap]
n_ions = 4
freq_x_mhz = 0.626
freq_y_mhz = 0.404
freq_z_mhz = 1.503

[raman]
drive_strength_mhz = 0.05
detuning_offset_khz = 10.0

[schedule]
b0_mhz = 0.029
duration_us = 100.0
end_ratio = 20.0
n_samples = 5
sign = -1

[detection]
fidelity = 0.98
"#;

fn run(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn geometry_for_seven_ions_has_seven_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = FOUR_ION
        .replace("n_ions = 4", "n_ions = 7")
        .replace("0.626", "0.486")
        .replace("0.404", "0.407")
        .replace("1.503", "1.482");
    let path = write_config(tmp.path(), &cfg);
    let out = run(tmp.path(), &["geometry", "--config", &path, "--out", "g"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("g/geometry.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "ion_index,x,y,z");
    assert_eq!(lines.len(), 8);
    let m = manifest(&tmp.path().join("g"));
    assert_eq!(m["command"], "geometry");
    assert_eq!(m["seed"], 3);
    assert!(m["outputs"].as_array().unwrap().iter().any(|o| o["file"] == "geometry.json"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &format!("{FOUR_ION}shots = 500\n"));
    for dir in ["a", "b"] {
        let out = run(tmp.path(), &["evolve", "--config", &path, "--out", dir]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = manifest(&tmp.path().join("a"));
    for entry in a["outputs"].as_array().unwrap() {
        let name = entry["file"].as_str().unwrap();
        if name == "config.toml" {
            continue;
        }
        let x = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert!(x == y, "{name} differs between identical runs");
    }
    assert_eq!(a["sampling"]["shots"], 500);
}

#[test]
fn seed_changes_sampled_shots() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &format!("{FOUR_ION}shots = 500\n"));
    assert!(run(tmp.path(), &["evolve", "--config", &path, "--out", "a"]).status.success());
    assert!(run(tmp.path(), &["evolve", "--config", &path, "--out", "b", "--seed", "99"]).status.success());
    let read = |d: &str, f: &str| std::fs::read(tmp.path().join(d).join(f)).unwrap();
    // The seed also drives the crystal multi-start, so exact probabilities agree to rounding only.
    let pop = |d: &str| -> f64 {
        let v: serde_json::Value = serde_json::from_slice(&read(d, "summary.json")).unwrap();
        v["ground_manifold_pop"].as_f64().unwrap()
    };
    assert!((pop("a") - pop("b")).abs() < 1e-9);
    assert_ne!(read("a", "shots.txt"), read("b", "shots.txt"));
}

#[test]
fn evolve_without_shots_has_no_sampling_section() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), FOUR_ION);
    let out = run(tmp.path(), &["evolve", "--config", &path, "--out", "e"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("e");
    assert!(manifest(&dir).get("sampling").is_none());
    assert!(!dir.join("shots.txt").exists());
    let hist = std::fs::read_to_string(dir.join("final_histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 17);
    assert!(hist.starts_with("index,bitstring,probability,detected\n"));
}

#[test]
fn unknown_key_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &FOUR_ION.replace("sign = -1", "sign = -1\nramp_speed = 2"));
    let out = run(tmp.path(), &["geometry", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ramp_speed"));
}

#[test]
fn numerical_failure_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &FOUR_ION.replace("freq_y_mhz = 0.404", "freq_y_mhz = 0.626"));
    let out = run(tmp.path(), &["geometry", "--config", &path]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn scan_range_from_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), FOUR_ION);
    let out = run(tmp.path(), &["scan", "--config", &path, "--out", "s", "--mu-range", "1.40:1.52:0.01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("s/scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 14);
    let bad = run(tmp.path(), &["scan", "--config", &path, "--mu-range", "1.5:1.4:0.01"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn reproduce_rejects_unknown_figure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["reproduce", "--figure", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_bundle_reruns_from_its_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["reproduce", "--figure", "fig2d", "--out", "f"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = tmp.path().join("f/config.toml");
    let again = run(tmp.path(), &["evolve", "--config", cfg.to_str().unwrap(), "--out", "g"]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    for name in ["final_histogram.csv", "trajectory.csv", "summary.json", "shots.txt"] {
        let x = std::fs::read(tmp.path().join("f").join(name)).unwrap();
        let y = std::fs::read(tmp.path().join("g").join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}
