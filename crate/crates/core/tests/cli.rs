use std::fs;
use std::path::Path;

use shearflow::cli::{run, EXIT_CONFIG, EXIT_OK};
use shearflow::config::CANONICAL;

fn short_config(extra: &[(&str, &str)]) -> String {
    let mut text = CANONICAL.replace("t_end = 10.0", "t_end = 0.2").replace("k = 4\nm = 6", "k = 2\nm = 3");
    for (from, to) in extra {
        text = text.replace(from, to);
    }
    text
}

fn invoke(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> i32 {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let mut args = vec![
        "shearflow".to_string(),
        cmd.to_string(),
        "--config".into(),
        cfg.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    run(args)
}

#[test]
fn zero_data_gives_zero_channels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(&[
        ("s = 1.0", "s = 0.0"),
        (r#"initial = { kind = "random_scaled", factor = 10.0 }"#, r#"initial = { kind = "zero" }"#),
    ]);
    assert_eq!(invoke(dir.path(), "simulate", &cfg, &["--no-timestamp"]), EXIT_OK);
    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,h_norm,v_norm,vprime_dual"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(&cols[1..4], &[0.0, 0.0, 0.0], "row {line}");
        rows += 1;
    }
    assert!(rows > 1);
}

#[test]
fn simulate_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = short_config(&[]);
    assert_eq!(invoke(a.path(), "simulate", &cfg, &["--no-timestamp"]), EXIT_OK);
    assert_eq!(invoke(b.path(), "simulate", &cfg, &["--no-timestamp"]), EXIT_OK);
    let read = |d: &Path| fs::read(d.join("out/trajectory.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert!(a.path().join("out/config.resolved").exists());
}

#[test]
fn timestamp_header_is_a_comment() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke(dir.path(), "simulate", &short_config(&[]), &[]), EXIT_OK);
    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(csv.starts_with("# generated "));
}

#[test]
fn constants_audit_writes_positive_constants() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke(dir.path(), "constants-audit", &short_config(&[]), &[]), EXIT_OK);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/audit.json")).unwrap()).unwrap();
    for key in ["epsilon", "big_c1", "big_c2", "big_c3", "k_energy", "rate", "gronwall_radius", "r0"] {
        let v = json[key].as_f64().unwrap_or_else(|| panic!("missing {key}"));
        assert!(v > 0.0 && v.is_finite(), "{key} = {v}");
    }
}

#[test]
fn verify_operators_passes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke(dir.path(), "verify-operators", &short_config(&[]), &[]), EXIT_OK);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/operators.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], serde_json::Value::Bool(true));
}

#[test]
fn verify_potential_passes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke(dir.path(), "verify-potential", &short_config(&[]), &[]), EXIT_OK);
    assert!(dir.path().join("out/potential.json").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(&[("nu = 1.0", "viscosity = 1.0")]);
    assert_eq!(invoke(dir.path(), "simulate", &cfg, &[]), EXIT_CONFIG);
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(["shearflow", "simulate", "--config", &dir.path().join("nope.toml").display().to_string()]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn seed_override_changes_the_trajectory() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = short_config(&[]);
    assert_eq!(invoke(a.path(), "simulate", &cfg, &["--no-timestamp", "--seed", "1"]), EXIT_OK);
    assert_eq!(invoke(b.path(), "simulate", &cfg, &["--no-timestamp", "--seed", "2"]), EXIT_OK);
    let read = |d: &Path| fs::read(d.join("out/trajectory.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
}
