use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn singlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singlab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn norms_const1() {
    let dir = tempfile::tempdir().unwrap();
    let o = singlab(dir.path(), &["norms", "--omega", "const1", "--d", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    let two_pi = 2.0 * std::f64::consts::PI;
    let l1 = v["norms"]["l1"].as_f64().unwrap();
    let llogl = v["norms"]["llogl"].as_f64().unwrap();
    let c = v["norms"]["c_omega"].as_f64().unwrap();
    assert!((l1 - two_pi).abs() < 1e-10);
    assert!((llogl - two_pi * 3f64.ln()).abs() < 1e-10);
    assert!((c - two_pi * (1.0 + 3f64.ln())).abs() < 1e-10);
    assert!(dir.path().join("norms.json").exists());
}

#[test]
fn params_trivial_tuple() {
    let dir = tempfile::tempdir().unwrap();
    let o = singlab(
        dir.path(),
        &["params", "--d", "2", "--delta", "1", "--gamma", "0", "--iota", "0", "--mu", "0", "--eps0", "0.5", "--N1", "1"],
    );
    assert_eq!(o.status.code(), Some(0));
    let v = &stdout_json(&o)["verdict"];
    assert_eq!(v["admissible"], true);
    let s: Vec<f64> = ["s1", "s2", "s3", "s4"].iter().map(|k| v[k].as_f64().unwrap()).collect();
    assert_eq!(s, vec![-0.5, -1.0, -1.0, -0.5]);
}

#[test]
fn check_kernel_power_size_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = singlab(dir.path(), &["check-kernel", "--kernel", "power", "--d", "2", "--samples", "10000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["c_size"].as_f64(), Some(1.0));
    let csv = fs::read_to_string(dir.path().join("kernel-check.csv")).unwrap();
    assert!(csv.starts_with("kernel,d,samples,seed,c_size"));
}

#[test]
fn unknown_config_key_is_exit_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"experiment\": \"norms\",\n  \"omega_kee\": \"const1\"\n}\n").unwrap();
    let o = singlab(dir.path(), &["norms", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("omega_kee"), "{err}");
}

#[test]
fn bad_value_in_config_points_at_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"experiment\": \"apply\",\n  \"grid\": {\"d\": 2, \"N\": 16, \"L\": 1.0},\n  \"operator\": {\n    \"epsilon_cells\": 0.1\n  }\n}\n").unwrap();
    let o = singlab(dir.path(), &["apply", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":5:"), "{err}");
}

#[test]
fn malformed_json_and_wrong_experiment_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    fs::write(&cfg, "{\n  \"seed\": 1,\n").unwrap();
    let o = singlab(dir.path(), &["norms", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&cfg, "{\"experiment\": \"net\"}").unwrap();
    let o = singlab(dir.path(), &["norms", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = singlab(dir.path(), &["norms", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flag_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["norms", "--omega", "nope"],
        vec!["norms", "--d", "5"],
        vec!["check-kernel", "--kernel", "higher:0"],
        vec!["probe", "--grid-n", "32", "--half-width", "1", "--epsilons", "0.01"],
        vec!["params", "--gamma", "0.1"],
    ] {
        let o = singlab(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"experiment": "norms", "omega_key": "theta1"}"#).unwrap();
    let o = singlab(dir.path(), &["norms", "--config", cfg.to_str().unwrap(), "--omega", "const1"]);
    assert_eq!(stdout_json(&o)["omega"], "const1");
}

#[test]
fn echoed_config_reruns_identically() {
    let a = tempfile::tempdir().unwrap();
    let o = singlab(a.path(), &["probe", "--grid-n", "64", "--half-width", "1", "--epsilons", "0.25,0.125", "--lambda-points", "6", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(a.path().join("probe.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 6);
    assert!(csv.lines().nth(1).unwrap().ends_with(",64,9"));
    let b = tempfile::tempdir().unwrap();
    let echoed = a.path().join("probe.config.json");
    let o = singlab(b.path(), &["probe", "--config", echoed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["probe.csv", "probe.json", "probe.config.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn cz_fixture_and_apply_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let o = singlab(dir.path(), &["cz", "--grid-n", "64", "--t", "2", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["all_pass"], true);
    let o = singlab(dir.path(), &["apply", "--grid-n", "32", "--half-width", "2", "--kernel", "muckenhoupt:3"]);
    assert_eq!(o.status.code(), Some(0));
    let grid = dir.path().join("apply.sgrd");
    let bytes = fs::read(&grid).unwrap();
    assert_eq!(&bytes[..4], b"SGRD");
    assert_eq!(bytes.len(), 24 + 32 * 32 * 16);
    // the output grid is a valid input
    let o = singlab(dir.path(), &["probe", "--grid-n", "32", "--half-width", "2", "--input", grid.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn net_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let o = singlab(dir.path(), &["--threads", "1", "net", "--d", "2", "--n", "8", "--gamma", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout_json(&o)["net"]["cardinality"].as_u64().unwrap() > 100);
    let o = singlab(dir.path(), &["--threads", "0", "net"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_singlab"))
        .env("SINGLAB_OUT", &target)
        .args(["params", "--d", "3"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(target.join("params.json").exists());
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = singlab(dir.path(), &["selftest"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains(", 0 failed"));
    assert!(!text.contains("FAIL "));
}
