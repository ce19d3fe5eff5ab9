//! End-to-end tests of the `dperm` binary: flag surface, file formats, exit
//! codes.

use std::path::Path;
use std::process::{Command, Output};

fn dperm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dperm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_toy_vectors(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("toy.vec");
    let mut rows = String::new();
    for i in 0..40 {
        let y: f64 = if i % 2 == 0 { 1.0 } else { -1.0 };
        let x0 = 0.4 * y + 0.01 * (i as f64 % 7.0 - 3.0);
        let x1 = 0.3 * y - 0.01 * (i as f64 % 5.0 - 2.0);
        rows.push_str(&format!("{y} {x0} {x1}\n"));
    }
    std::fs::write(&path, rows).unwrap();
    path
}

#[test]
fn train_writes_model_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_vectors(dir.path());
    let out = dperm(
        &[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--lambda",
            "0.1",
            "--out",
            "model.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("model.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["method"], "nonprivate");
    assert_eq!(value["weights"].as_array().unwrap().len(), 2);
}

#[test]
fn private_training_requires_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_vectors(dir.path());
    let out = dperm(
        &[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--method",
            "output",
            "--lambda",
            "0.1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_vector_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.vec");
    std::fs::write(&path, "1 0.5 abc\n").unwrap();
    let out = dperm(
        &["train", "--data", path.to_str().unwrap(), "--lambda", "0.1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn out_of_ball_example_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.vec");
    std::fs::write(&path, "1 0.9 0.9\n-1 0.1 0.1\n").unwrap();
    let out = dperm(
        &["train", "--data", path.to_str().unwrap(), "--lambda", "0.1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_vectors(dir.path());
    let train = dperm(
        &[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--method",
            "objective",
            "--epsilon",
            "5.0",
            "--lambda",
            "0.05",
            "--seed",
            "7",
            "--out",
            "model.json",
        ],
        dir.path(),
    );
    assert!(
        train.status.success(),
        "{}",
        String::from_utf8_lossy(&train.stderr)
    );
    let out = dperm(
        &[
            "predict",
            "--model",
            "model.json",
            "--data",
            data.to_str().unwrap(),
            "--out",
            "preds.txt",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let preds = std::fs::read_to_string(dir.path().join("preds.txt")).unwrap();
    assert_eq!(preds.lines().count(), 40);
    for line in preds.lines() {
        let mut parts = line.split_whitespace();
        let label: f64 = parts.next().unwrap().parse().unwrap();
        assert!(label == 1.0 || label == -1.0);
        let _score: f64 = parts.next().unwrap().parse().unwrap();
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("error rate"));
}

#[test]
fn tabular_input_with_schema() {
    let dir = tempfile::tempdir().unwrap();
    let schema = r#"{
        "columns": [
            {"name": "size", "kind": "numeric"},
            {"name": "color", "kind": "categorical", "levels": ["red", "blue"]},
            {"name": "outcome", "kind": "categorical", "levels": ["yes", "no"]}
        ],
        "label": {"column": "outcome", "positive": "yes"}
    }"#;
    std::fs::write(dir.path().join("schema.json"), schema).unwrap();
    let mut rows = String::new();
    for i in 0..30 {
        let yes = i % 2 == 0;
        rows.push_str(&format!(
            "{}, {}, {}\n",
            if yes { 4 } else { 1 },
            if yes { "red" } else { "blue" },
            if yes { "yes" } else { "no" }
        ));
    }
    std::fs::write(dir.path().join("table.csv"), rows).unwrap();
    let out = dperm(
        &[
            "train",
            "--data",
            "table.csv",
            "--schema",
            "schema.json",
            "--lambda",
            "0.01",
            "--out",
            "model.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("preprocessed"));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.json")).unwrap())
            .unwrap();
    // 1 numeric + 2 one-hot levels.
    assert_eq!(model["weights"].as_array().unwrap().len(), 3);
}

#[test]
fn tune_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_vectors(dir.path());
    let out = dperm(
        &[
            "tune",
            "--data",
            data.to_str().unwrap(),
            "--method",
            "output",
            "--lambda",
            "0.05",
            "0.5",
            "--epsilon",
            "2.0",
            "--seed",
            "3",
            "--out",
            "tuned.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("tuned.json")).unwrap())
            .unwrap();
    let tuning = &model["tuning"];
    assert_eq!(tuning["lambda_candidates"].as_array().unwrap().len(), 2);
    assert!(tuning["chosen_index"].as_u64().unwrap() < 2);
    // Scores hidden unless --record-scores.
    assert!(tuning.get("scores").is_none());
}

#[test]
fn audit_subcommand_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dperm(
        &[
            "audit",
            "--test",
            "det-identity",
            "--trials",
            "25",
            "--out",
            "report.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(reports[0]["test"], "det_identity");
    assert_eq!(reports[0]["pass"], true);
}

#[test]
fn audit_sensitivity_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dperm(
        &["audit", "--test", "sensitivity", "--pairs", "10"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sensitivity[logistic]: PASS"));
    assert!(stderr.contains("sensitivity[huber]: PASS"));
    assert!(stderr.contains("sensitivity[smoothed_hinge]: PASS"));
}

#[test]
fn audit_negative_control_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dperm(
        &[
            "audit",
            "--test",
            "dp-ratio",
            "--noise-scale",
            "0.25",
            "--repeats",
            "20000",
            "--bins",
            "30",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn experiment_synthetic_grid_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "experiment",
        "--synthetic",
        "--synthetic-n",
        "150",
        "--synthetic-d",
        "4",
        "--method",
        "nonprivate",
        "output",
        "--epsilon",
        "1.0",
        "--lambda",
        "0.01",
        "0.1",
        "--folds",
        "3",
        "--repeats",
        "2",
        "--seed",
        "21",
        "--grad-tol",
        "1e-6",
    ];
    let out1 = dperm(
        &[&args[..], &["--workers", "1", "--out", "a.csv"]].concat(),
        dir.path(),
    );
    assert!(
        out1.status.success(),
        "{}",
        String::from_utf8_lossy(&out1.stderr)
    );
    let out2 = dperm(
        &[&args[..], &["--workers", "3", "--out", "b.csv"]].concat(),
        dir.path(),
    );
    assert!(out2.status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("schema_version,method,loss"));
    // nonprivate: 2 lambdas x 3 folds; output: 1 eps x 2 lambdas x 3 folds x 2 repeats.
    assert_eq!(text.lines().count() - 1, 6 + 12);
}

#[test]
fn experiment_learning_curve_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dperm(
        &[
            "experiment",
            "--synthetic",
            "--synthetic-n",
            "400",
            "--synthetic-d",
            "4",
            "--mode",
            "learning-curve",
            "--method",
            "nonprivate",
            "objective",
            "--epsilon",
            "1.0",
            "--lambda",
            "0.01",
            "0.1",
            "--n-schedule",
            "60",
            "120",
            "--repeats",
            "2",
            "--seed",
            "5",
            "--grad-tol",
            "1e-6",
            "--format",
            "json",
            "--out",
            "curve.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("curve.json")).unwrap())
            .unwrap();
    assert_eq!(result["schema_version"], 1);
    assert_eq!(result["records"].as_array().unwrap().len(), 8);
}
