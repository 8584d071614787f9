use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn entrokit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entrokit"))
        .args(args)
        .env("ENTROKIT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("entrokit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn estimate_reports_both_estimators_and_interval() {
    let path = scratch("est.csv");
    let values: String = (0..400)
        .map(|i| format!("{}\n", ((i * 37) % 400) as f64 / 400.0))
        .collect();
    std::fs::write(&path, format!("x\n{values}")).unwrap();
    let out = entrokit(&[
        "estimate",
        "--input",
        path.to_str().unwrap(),
        "--kernel",
        "epanechnikov",
        "--h",
        "0.2",
        "--beta",
        "0.25",
        "--alpha",
        "1",
    ]);
    let v = stdout_json(&out);
    let est = v["estimates"].as_array().unwrap();
    assert_eq!(est.len(), 2);
    assert_eq!(est[0]["estimator"], "plugin_integral");
    assert_eq!(est[1]["estimator"], "resubstitution");
    let lower = v["interval"]["lower"].as_f64().unwrap();
    let upper = v["interval"]["upper"].as_f64().unwrap();
    let center = v["interval"]["center"].as_f64().unwrap();
    assert!(lower <= center && center <= upper);
    assert_eq!(v["n"], 400);
    assert_eq!(v["config"]["kernel"], "epanechnikov");
}

#[test]
fn bits_flag_rescales_entropies() {
    let path = scratch("bits.csv");
    let values: String = (0..300)
        .map(|i| format!("{}\n", (i as f64 * 0.618).fract()))
        .collect();
    std::fs::write(&path, values).unwrap();
    let p = path.to_str().unwrap();
    let nats = stdout_json(&entrokit(&["estimate", "--input", p, "--h", "0.25"]));
    let bits = stdout_json(&entrokit(&[
        "estimate", "--input", p, "--h", "0.25", "--bits",
    ]));
    let a = nats["estimates"][1]["value"].as_f64().unwrap();
    let b = bits["estimates"][1]["value"].as_f64().unwrap();
    assert!((b - a / std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(bits["unit"], "bits");
}

#[test]
fn validate_surfaces_true_entropy() {
    let out = entrokit(&[
        "validate",
        "--model",
        "normal:sigma=1",
        "--n",
        "2000",
        "--seed",
        "7",
        "--kernel",
        "gaussian",
        "--h",
        "0.3",
    ]);
    let v = stdout_json(&out);
    assert!((v["true_entropy"].as_f64().unwrap() - 1.4189385).abs() < 1e-7);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r["status"], "ok");
        assert!(r["centering"].is_f64() && r["normalized_deviation"].is_f64());
    }
}

#[test]
fn sweep_matches_golden_file() {
    let out = entrokit(&[
        "sweep", "--model", "uniform", "--kernel", "boxcar", "--A", "0.5", "--B", "2", "--delta",
        "0.2", "--count", "3", "--n", "200,400", "--seeds", "1..2", "--points", "201",
    ]);
    assert!(out.status.success());
    let golden = include_str!("golden/sweep_uniform_boxcar.csv");
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn sweep_output_is_byte_identical_and_thread_independent() {
    let args = [
        "sweep",
        "--model",
        "normal:sigma=1",
        "--kernel",
        "gaussian",
        "--count",
        "3",
        "--n",
        "300",
        "--seeds",
        "1..3",
        "--estimators",
        "plugin,resub,loo",
    ];
    let a = entrokit(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_entrokit"))
        .args(args)
        .env("ENTROKIT_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert!(lines
        .next()
        .unwrap()
        .starts_with("n,seed,h,gamma,estimator,estimate,centering"));
    assert_eq!(lines.count(), 3 * 3 * 3);
}

#[test]
fn sweep_writes_summary_json() {
    let summary = scratch("summary.json");
    let csv = scratch("rows.csv");
    let out = entrokit(&[
        "sweep",
        "--model",
        "uniform",
        "--kernel",
        "boxcar",
        "--count",
        "2",
        "--n",
        "200",
        "--seeds",
        "4,5",
        "--summary",
        summary.to_str().unwrap(),
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    for key in ["config", "medians", "sups", "interval_coverage"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(std::fs::read_to_string(&csv)
        .unwrap()
        .starts_with("# config: "));
}

#[test]
fn bias_reports_slope() {
    let v = stdout_json(&entrokit(&[
        "bias",
        "--model",
        "cosine",
        "--h",
        "0.2,0.1,0.05",
        "--points",
        "51",
    ]));
    let slope = v["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.3, "{slope}");
}

#[test]
fn errors_carry_kind_prefix_and_exit_code() {
    let out = entrokit(&[
        "estimate",
        "--input",
        "/definitely/missing.csv",
        "--h",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR:io:"));

    let out = entrokit(&[
        "validate",
        "--model",
        "normal:sigma=1",
        "--n",
        "100",
        "--h",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR:domain:"));

    let out = entrokit(&["sweep", "--model", "uniform", "--n", "100", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR:config:"));

    let out = entrokit(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn isolated_points_exit_with_numeric_code() {
    // points farther apart than the boxcar support leave each LOO density at zero
    let out = entrokit(&[
        "validate",
        "--model",
        "gaussmix:w=0.5,mu=3",
        "--n",
        "20",
        "--h",
        "0.001",
        "--kernel",
        "boxcar",
        "--estimators",
        "loo",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR:isolated:"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"][0]["status"], "error:isolated");
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_entrokit"))
        .args(["bias", "--model", "cosine"])
        .env("ENTROKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR:config:"));
}
