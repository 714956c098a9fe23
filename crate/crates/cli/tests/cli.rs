use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = r#"{
    "data": {"synthetic": {"n_sources": 4, "samples_per_source": 30,
             "reference_size": 20, "test_size": 200, "n_features": 2,
             "class_separation": 2.0}},
    "corruption": {"kind": "shuffled_labels", "n_corrupted": [0, 2], "proportion": 1.0},
    "methods": ["ours", "all_data", "reference_only"],
    "lambda_grid": [0.0, 1.0], "ridge_grid": [0.01], "cv_folds": 3,
    "repeats": 2, "seed": 5
}"#;

fn run(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_robust-sources"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json_stdout(args: &[&str]) -> Value {
    serde_json::from_slice(&run(args).stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_owned()
}

fn generate(dir: &Path) -> (String, String) {
    let config = write_config(dir);
    let data = dir.join("data");
    run(&["generate", "--config", &config, "--out-dir", data.to_str().unwrap()]);
    (
        data.join("sources").to_str().unwrap().to_owned(),
        data.join("reference.csv").to_str().unwrap().to_owned(),
    )
}

#[test]
fn generate_discrepancy_weights_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (sources, reference) = generate(dir.path());
    assert_eq!(fs::read_dir(&sources).unwrap().count(), 4);

    let disc = dir.path().join("disc.json");
    run(&["discrepancy", &sources, &reference, "--out", disc.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&disc).unwrap()).unwrap();
    let d = v["discrepancies"].as_array().unwrap();
    assert_eq!(d.len(), 4);
    assert!(d.iter().all(|x| (0.0..=1.0).contains(&x.as_f64().unwrap())));
    assert_eq!(v["sample_counts"], serde_json::json!([30, 30, 30, 30]));

    let w = json_stdout(&["weights", disc.to_str().unwrap(), "--lambda", "1"]);
    let alpha: Vec<f64> = serde_json::from_value(w["alpha"].clone()).unwrap();
    assert_eq!(alpha.len(), 4);
    assert!(alpha.iter().all(|a| *a >= 0.0));
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
}

#[test]
fn corrupt_with_flags_and_spec_file_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (_, reference) = generate(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run(&[
        "corrupt", &reference, a.to_str().unwrap(), "--kind", "label_bias", "--proportion", "0.5", "--seed", "9",
    ]);
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"kind": "label_bias", "proportion": 0.5, "seed": 9}"#).unwrap();
    run(&["corrupt", &reference, b.to_str().unwrap(), "--spec", spec.to_str().unwrap()]);
    let a_text = fs::read_to_string(&a).unwrap();
    assert_eq!(a_text, fs::read_to_string(&b).unwrap());

    let positives = |text: &str| text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    let before = fs::read_to_string(&reference).unwrap();
    assert!(positives(&a_text) >= positives(&before));
    assert_eq!(a_text.lines().count(), before.lines().count());
}

#[test]
fn experiment_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    run(&["experiment", "--config", &config, "--out", first.to_str().unwrap()]);
    run(&["experiment", "--config", &config, "--out", second.to_str().unwrap()]);
    for (a, b) in [
        ("first.csv", "second.csv"),
        ("first.json", "second.json"),
        ("first_summary.csv", "second_summary.csv"),
    ] {
        assert_eq!(
            fs::read(dir.path().join(a)).unwrap(),
            fs::read(dir.path().join(b)).unwrap(),
            "{a} differs from {b}"
        );
    }
    let results = fs::read_to_string(&first).unwrap();
    assert!(results.starts_with("method,n_corrupted,repeat,seed,test_error,selected_lambda,selected_ridge"));
    assert_eq!(results.lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn train_reports_result_and_saves_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let model = dir.path().join("model.json");
    let v = json_stdout(&[
        "train", "--method", "ours", "--config", &config, "--n-corrupted", "2", "--model-out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(v["method"], "ours");
    assert_eq!(v["n_corrupted"], 2);
    let err = v["test_error"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&err));
    let saved: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert!(saved.is_object());
}

#[test]
fn federated_cases_write_traces() {
    let dir = tempfile::tempdir().unwrap();
    let (sources, reference) = generate(dir.path());
    let central = json_stdout(&["discrepancy", &sources, &reference]);

    let trace1 = dir.path().join("case1.jsonl");
    let one = json_stdout(&[
        "simulate-federated", "--case", "1", "--pool", &sources, "--reference", &reference, "--trace",
        trace1.to_str().unwrap(),
    ]);
    assert_eq!(one["discrepancies"], central["discrepancies"]);
    let lines = fs::read_to_string(&trace1).unwrap().lines().count();
    assert_eq!(lines as u64, one["messages"].as_u64().unwrap());

    let trace2 = dir.path().join("case2.jsonl");
    let two = json_stdout(&[
        "simulate-federated", "--case", "2", "--pool", &sources, "--reference", &reference, "--rounds", "20",
        "--trace", trace2.to_str().unwrap(),
    ]);
    assert_eq!(two["messages"].as_u64().unwrap(), 4 * (2 * 20 + 2));
    assert_eq!(
        fs::read_to_string(&trace2).unwrap().lines().count() as u64,
        two["messages"].as_u64().unwrap()
    );
    for d in two["discrepancies"].as_array().unwrap() {
        assert!((0.0..=1.0).contains(&d.as_f64().unwrap()));
    }
}

#[test]
fn invalid_arguments_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"discrepancies": [0.1, 2.0], "sample_counts": [1, 1]}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_robust-sources"))
        .args(["weights", bad.to_str().unwrap(), "--lambda", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
