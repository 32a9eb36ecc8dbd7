//! Drives the `robust-defer` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-defer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a synthetic log through `train --synthetic` and returns its path.
fn synthetic_csv(dir: &TempDir) -> std::path::PathBuf {
    let out = dir.path().join("seed-run");
    let res = run(&[
        "train",
        "--synthetic",
        "--n",
        "600",
        "--n-test",
        "500",
        "--true-log-gamma",
        "1,2.5",
        "--method",
        "human",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    out.join("data.csv")
}

#[test]
fn toy_reports_population_and_estimates() {
    let out = run(&["toy", "--gamma", "0.3", "--n", "50000", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["implied_msm_gamma"], 4.0);
    let est = &v["estimates"];
    assert!((est["human_risk"].as_f64().unwrap() + 1.2).abs() <= 0.05);
    assert!((est["nominal_always_treat"].as_f64().unwrap() + 1.6).abs() <= 0.05);
    assert!((est["worst_case_always_treat"].as_f64().unwrap() + 1.0).abs() <= 0.05);
}

#[test]
fn validate_accepts_generated_logs() {
    let dir = TempDir::new().unwrap();
    let csv = synthetic_csv(&dir);
    let out = run(&["validate", p(&csv)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("ok: 600 rows, 5 covariates, 2 arms, 2 experts"),
        "{text}"
    );
}

#[test]
fn validate_flags_violations_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x0,t,y\n0.5,0,1.0\n0.1,-1,2.0\n0.2,1,NaN\n").unwrap();
    let out = run(&["validate", p(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("violation"));

    let gapped = dir.path().join("gapped.csv");
    fs::write(&gapped, "x0,x2,t,y\n0.5,1,0,1.0\n").unwrap();
    assert_eq!(code(&run(&["validate", p(&gapped)])), 1);
    assert_eq!(
        code(&run(&["validate", p(&dir.path().join("missing.csv"))])),
        1
    );
}

#[test]
fn fit_propensity_writes_model_json() {
    let dir = TempDir::new().unwrap();
    let csv = synthetic_csv(&dir);
    let model = dir.path().join("model.json");
    let out = run(&[
        "fit-propensity",
        p(&csv),
        "--epsilon",
        "0.02",
        "--out",
        p(&model),
    ]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(v["model"]["coefficients"].as_array().unwrap().len(), 6);
    assert_eq!(v["model"]["epsilon"], 0.02);
    assert_eq!(
        code(&run(&["fit-propensity", p(&csv), "--epsilon", "0.7"])),
        1
    );
}

#[test]
fn calibrate_gamma_reports_reference_level() {
    let dir = TempDir::new().unwrap();
    let csv = synthetic_csv(&dir);
    let out = run(&[
        "calibrate-gamma",
        p(&csv),
        "--z-cols",
        "3",
        "--quantile",
        "0.9",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!(v["gamma_ref"].as_f64().unwrap() >= 1.0);
    assert_eq!(
        code(&run(&["calibrate-gamma", p(&csv), "--z-cols", "9"])),
        1
    );
}

#[test]
fn train_on_csv_with_policy_baseline() {
    let dir = TempDir::new().unwrap();
    let csv = synthetic_csv(&dir);
    let weights = dir.path().join("baseline.csv");
    fs::write(&weights, "w0,w1,w2,w3,w4,w5\n-0.5,0.3,0,0,0.2,0\n").unwrap();
    let out_dir = dir.path().join("confhai");
    let out = run(&[
        "train",
        p(&csv),
        "--method",
        "confhai",
        "--gamma",
        "2.0",
        "--cost",
        "0.1",
        "--baseline",
        "csv-policy",
        "--baseline-weights",
        p(&weights),
        "--seed",
        "3",
        "--iterations",
        "100",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert!(
        summary["certificate_vs_baseline"].as_f64().unwrap()
            <= summary["objective"].as_f64().unwrap() + 1e-12
    );
    let system: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("system.json")).unwrap()).unwrap();
    assert_eq!(system["objective_trace"].as_array().unwrap().len(), 100);
    assert!(out_dir.join("propensity.json").exists());

    fs::write(&weights, "1,2,3\n").unwrap();
    let short = run(&[
        "train",
        p(&csv),
        "--method",
        "confhai",
        "--baseline",
        "csv-policy",
        "--baseline-weights",
        p(&weights),
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&short), 1);
}

#[test]
fn train_personalized_on_synthetic_draw() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("person");
    let out = run(&[
        "train",
        "--synthetic",
        "--n",
        "500",
        "--n-test",
        "1000",
        "--true-log-gamma",
        "1,2.5,4",
        "--method",
        "confhai-person",
        "--gamma-per-expert",
        "2.718281828,12.18249396,54.59815",
        "--iterations",
        "50",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    let fractions = summary["oracle"]["routing_fractions"].as_array().unwrap();
    assert_eq!(fractions.len(), 4);
    let total: f64 = fractions.iter().map(|f| f.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(out_dir.join("truth.csv").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        code(&run(&[
            "train",
            "--synthetic",
            "--method",
            "oracle",
            "--out",
            "x"
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "train",
            "--synthetic",
            "--method",
            "confhai",
            "--gamma",
            "0.5",
            "--out",
            "x"
        ])),
        1
    );
    assert_eq!(code(&run(&["toy", "--gamma", "0.5"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

fn sweep_config(dir: &TempDir) -> std::path::PathBuf {
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{
            "data": {"kind": "toy", "n_train": 2000, "n_test": 50000, "gamma": 0.3},
            "methods": ["human", "confao"],
            "log_gamma_grid": [0.01, 1.0, 1.3862943611198906],
            "seeds": [1, 2, 3, 4, 5],
            "train": {"iterations": 30}
        }"#,
    )
    .unwrap();
    config
}

#[test]
fn sweep_writes_stable_reports() {
    let dir = TempDir::new().unwrap();
    let config = sweep_config(&dir);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        code(&run(&["sweep", "--config", p(&config), "--out", p(&a)])),
        0
    );
    assert_eq!(
        code(&run(&["sweep", "--config", p(&config), "--out", p(&b)])),
        0
    );
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 3 * 5);
    assert_eq!(results, fs::read_to_string(b.join("results.csv")).unwrap());
    assert_eq!(
        fs::read_to_string(a.join("summary.json")).unwrap(),
        fs::read_to_string(b.join("summary.json")).unwrap()
    );
    let mut rdr = csv::Reader::from_path(a.join("results.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let regret = headers.iter().position(|h| h == "regret").unwrap();
    let method = headers.iter().position(|h| h == "method").unwrap();
    for record in rdr.records() {
        let record = record.unwrap();
        if &record[method] == "human" {
            let r: f64 = record[regret].parse().unwrap();
            assert!((r + 0.7).abs() <= 0.05, "human regret {r}");
        }
    }
}

#[test]
fn sweep_rejects_unknown_config_fields() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"data": {"kind": "toy", "n_train": 10, "n_test": 10, "gamma": 0.3},
            "methods": ["human"], "log_gamma_grid": [0.0], "seeds": [1], "learning_rate": 3}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["sweep", "--config", p(&config)])), 1);
}
