use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gridfreq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridfreq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic_2021_900s.csv")
}

#[test]
fn usage_errors_exit_2() {
    let o = gridfreq(&["fp-kurtosis", "--b", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gridfreq(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gridfreq(&["fp-kurtosis", "--d-over-m", "x", "--b", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn operation_errors_exit_1_with_error_name() {
    let o = gridfreq(&["fp-kurtosis", "--d-over-m", "-1", "--b", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("InvalidArgumentError"), "{err}");

    // nu = 1 + 2 * 1 / 1 = 3: no fourth moment.
    let o = gridfreq(&[
        "fp-kurtosis",
        "--d-over-m",
        "1",
        "--b",
        "1",
        "--c",
        "1",
        "--kind",
        "exact",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MomentDivergence"));
}

#[test]
fn fp_kurtosis_reports_with_manifest() {
    let o = gridfreq(&[
        "fp-kurtosis",
        "--d-over-m",
        "0.6723",
        "--b",
        "0.0023",
        "--c",
        "0.0467",
        "--kind",
        "exact",
    ]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert!((v["kurtosis"].as_f64().unwrap() - 3.2326).abs() < 1e-3);
    assert_eq!(v["manifest"]["command"], "fp-kurtosis");
    assert_eq!(v["manifest"]["parameters"]["c"], 0.0467);

    let o = gridfreq(&[
        "fp-kurtosis",
        "--d-over-m",
        "2",
        "--b",
        "3",
        "--kind",
        "gaussian",
    ]);
    let v = stdout_json(&o);
    assert!((v["kurtosis"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!((v["variance"].as_f64().unwrap() - 1.5).abs() < 1e-9);
}

#[test]
fn config_file_fills_flags_and_typed_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"d_over_m": 0.5, "b": 2, "kind": "gaussian"}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let v = stdout_json(&gridfreq(&["--config", cfg, "fp-kurtosis"]));
    assert!((v["variance"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    let v = stdout_json(&gridfreq(&["--config", cfg, "fp-kurtosis", "--b", "3"]));
    assert!((v["variance"].as_f64().unwrap() - 6.0).abs() < 1e-9);

    std::fs::write(dir.path().join("bad.json"), "[1, 2]").unwrap();
    let bad = dir.path().join("bad.json");
    let o = gridfreq(&["--config", bad.to_str().unwrap(), "fp-kurtosis"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_fraction_scenario_is_empty() {
    let v = stdout_json(&gridfreq(&["scenario", "--fraction", "0", "--seed", "5"]));
    assert_eq!(v["events"].as_array().unwrap().len(), 0);
    assert_eq!(v["realized_fraction"], 0.0);
    assert_eq!(v["manifest"]["seed"], 5);
}

#[test]
fn scenario_feeds_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc.json");
    let o = gridfreq(&[
        "scenario",
        "--fraction",
        "0.2",
        "--duration",
        "36000",
        "--seed",
        "1",
        "--out",
        sc.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!read_json(&sc)["events"].as_array().unwrap().is_empty());
    assert!(dir.path().join("sc.json.manifest.json").exists());

    let out = dir.path().join("sim.csv");
    let o = gridfreq(&[
        "simulate",
        "--scenario",
        sc.to_str().unwrap(),
        "--duration",
        "36000",
        "--node",
        "Bloemfontein",
        "--truncate-sigmas",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time_s,node_id,omega_rad_s"));
    assert_eq!(lines.count(), 36000);

    let summary = read_json(&dir.path().join("sim.csv.summary.json"));
    assert!(summary["max_imbalance"].as_f64().unwrap() <= 1e-9);
    assert!((summary["shed_fraction"].as_f64().unwrap() - 0.2).abs() < 1e-9);
    assert_eq!(summary["noise_b"], 25.0);
    assert_eq!(summary["nodes"][0]["id"], "BFN");
    assert!(summary["nodes"][0]["truncated_moments"]["kurtosis"].is_number());

    let manifest = read_json(&dir.path().join("sim.csv.manifest.json"));
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert_eq!(inputs[1]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn unknown_node_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let o = gridfreq(&[
        "simulate",
        "--duration",
        "10",
        "--node",
        "Atlantis",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("ConfigError"));
}

#[test]
fn powerflow_of_bundled_grid_converges() {
    let v = stdout_json(&gridfreq(&["powerflow"]));
    assert!(v["relative_residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 26);
    assert_eq!(v["manifest"]["inputs"][0]["path"], "<bundled za26>");
}

#[test]
fn series_pipeline_writes_outputs_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture();
    let input = input.to_str().unwrap();

    let v = stdout_json(&gridfreq(&["stats", "--input", input]));
    assert_eq!(v["count"], 35040);
    assert_eq!(v["dt"], 900.0);

    let km = dir.path().join("km.csv");
    let o = gridfreq(&[
        "km-estimate",
        "--input",
        input,
        "--correct",
        "--out",
        km.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("km.csv.json").exists());
    assert!(dir.path().join("km.csv.manifest.json").exists());

    let fit = stdout_json(&gridfreq(&["fp-fit", "--input", km.to_str().unwrap()]));
    assert!(fit["d_over_m"].as_f64().unwrap() > 0.0);
    assert_eq!(fit["manifest"]["inputs"].as_array().unwrap().len(), 2);

    let ex = dir.path().join("ex");
    let o = gridfreq(&[
        "extrema",
        "--input",
        input,
        "--out-dir",
        ex.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "f_fmax.csv",
        "f_fmin.csv",
        "f_range.csv",
        "profile.json",
        "manifest.json",
    ] {
        assert!(ex.join(f).exists(), "{f}");
    }
    assert_eq!(
        read_json(&ex.join("profile.json"))["narrows_away_from_nominal"],
        true
    );
}

#[test]
fn missing_input_exits_1() {
    let o = gridfreq(&["stats", "--input", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reproduce_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep.json");
    let o = gridfreq(&[
        "reproduce",
        "--ensemble",
        "1",
        "--hours",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rep = read_json(&out);
    let checks = rep["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 7);
    let all = checks.iter().all(|c| c["pass"] == true);
    assert_eq!(rep["all_pass"], all);
    assert_eq!(o.status.success(), all);
    let exact = checks
        .iter()
        .find(|c| c["name"] == "exact_kurtosis")
        .unwrap();
    assert_eq!(exact["pass"], true);
    assert!(dir.path().join("rep.json.manifest.json").exists());
}
