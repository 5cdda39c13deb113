use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trustscore"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn workdir(files: &[(&str, &str)]) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, contents) in files {
        std::fs::write(dir.path().join(name), contents).unwrap();
    }
    dir
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const SEVEN: &str = "x,label\n0,A\n1,A\n2,A\n10,A\n20,B\n21,B\n22,B\n";
const TWO_POINT: &str = "x,label\n0,A\n10,B\n";

#[test]
fn fit_summary_kept_counts() {
    let dir = workdir(&[("train.csv", SEVEN)]);
    let out = run(dir.path(), &["fit", "--train", "train.csv", "--alpha", "0.25", "--k", "2", "--out", "m.json"]);
    let summary = stdout_json(&out);
    let kept: Vec<u64> = summary["classes"].as_array().unwrap().iter().map(|c| c["kept"].as_u64().unwrap()).collect();
    assert_eq!(kept, [3, 3]);
    assert_eq!(summary["classes"][0]["epsilon"], 1.0);
    assert!(dir.path().join("m.json").exists());

    let out = run(dir.path(), &["fit", "--train", "train.csv", "--alpha", "0", "--k", "2", "--out", "m.json"]);
    let summary = stdout_json(&out);
    for c in summary["classes"].as_array().unwrap() {
        assert_eq!(c["kept"], c["size"]);
    }
}

#[test]
fn missing_input_is_contract_failure() {
    let dir = workdir(&[]);
    let out = run(dir.path(), &["fit", "--train", "absent.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "missing_file");
    assert_eq!(err["path"], "absent.csv");
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn bad_flags_exit_two() {
    let dir = workdir(&[("train.csv", SEVEN)]);
    let out = run(dir.path(), &["fit", "--train", "train.csv", "--filtering", "magic", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["fit", "--train", "train.csv", "--alpha", "1.5", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["fit", "--train", "train.csv", "--label-column", "y", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_classifier_is_computation_failure() {
    let dir = workdir(&[("train.csv", SEVEN), ("test.csv", "x\n3\n")]);
    let out = run(
        dir.path(),
        &["predict", "--train", "train.csv", "--test", "test.csv", "--learning-rate", "1e308", "--out", "p.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "non_finite_loss");
}

fn scores_rows(dir: &Path, test: &str, preds: &str) -> (Output, String) {
    std::fs::write(dir.join("test.csv"), test).unwrap();
    std::fs::write(dir.join("preds.csv"), preds).unwrap();
    let out = run(
        dir,
        &["score", "--model", "m.json", "--test", "test.csv", "--predictions", "preds.csv", "--out", "scores.csv"],
    );
    let text = std::fs::read_to_string(dir.join("scores.csv")).unwrap_or_default();
    (out, text)
}

#[test]
fn score_hand_fixture() {
    let dir = workdir(&[("train.csv", TWO_POINT)]);
    let fit = run(dir.path(), &["fit", "--train", "train.csv", "--alpha", "0", "--k", "1", "--out", "m.json"]);
    assert!(fit.status.success());

    let (out, text) = scores_rows(dir.path(), "x\n2\n0\n5\n", "predicted,confidence\nA,0.9\nA,1\nB,0.5\n");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,predicted,trust_score,one_nn_ratio,confidence");
    assert_eq!(lines[1], "0,A,4.0,0.25,0.9");
    assert_eq!(lines[2], "1,A,inf,0.0,1.0");
    assert_eq!(lines[3], "2,B,1.0,1.0,0.5");
}

#[test]
fn score_empty_and_misaligned() {
    let dir = workdir(&[("train.csv", TWO_POINT)]);
    assert!(run(dir.path(), &["fit", "--train", "train.csv", "--k", "1", "--out", "m.json"]).status.success());

    let (out, text) = scores_rows(dir.path(), "x\n", "predicted,confidence\n");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text, "index,predicted,trust_score,one_nn_ratio,confidence\n");

    let (out, _) = scores_rows(dir.path(), "x\n1\n2\n", "predicted,confidence\nA,1\n");
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "row_count_mismatch");

    let (out, _) = scores_rows(dir.path(), "y\n1\n", "predicted,confidence\nA,1\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_oracle_scores() {
    // trust 1 on the 8 correct rows, 0 on the 2 wrong ones
    let mut scores = String::from("index,predicted,trust_score,one_nn_ratio,confidence\n");
    let mut test = String::from("x,label\n");
    for i in 0..10 {
        let wrong = i % 5 == 0;
        scores.push_str(&format!("{i},A,{},0.5,0.5\n", if wrong { 0 } else { 1 }));
        test.push_str(&format!("{i},{}\n", if wrong { "B" } else { "A" }));
    }
    let dir = workdir(&[("scores.csv", &scores), ("test.csv", &test)]);
    let out = run(dir.path(), &["eval", "--scores", "scores.csv", "--test", "test.csv", "--format", "json", "--out", "c.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curves: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    let curves = curves.as_array().unwrap();
    assert_eq!(curves.len(), 6);
    let trust = &curves[0];
    assert_eq!(trust["method"], "trust_score");
    assert_eq!(trust["mode"], "trustworthy");
    assert_eq!(trust["reference_line"], 0.2);
    let precisions = trust["precisions"].as_array().unwrap();
    for (p, v) in precisions.iter().enumerate().skip(20) {
        assert_eq!(*v, 1.0, "level {p}");
    }

    let first = std::fs::read(dir.path().join("c.json")).unwrap();
    assert!(run(dir.path(), &["eval", "--scores", "scores.csv", "--test", "test.csv", "--format", "json", "--out", "c.json"])
        .status
        .success());
    assert_eq!(first, std::fs::read(dir.path().join("c.json")).unwrap());
}

#[test]
fn eval_rejects_reordered_scores() {
    let scores = "index,predicted,trust_score,one_nn_ratio,confidence\n1,A,1,0,1\n0,A,1,0,1\n";
    let dir = workdir(&[("scores.csv", scores), ("test.csv", "x,label\n0,A\n1,A\n")]);
    let out = run(dir.path(), &["eval", "--scores", "scores.csv", "--test", "test.csv", "--out", "c.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

fn gaussian_pair_csv() -> String {
    let spec = trustscore::synth::SyntheticSpec::two_gaussians_1d(-1.0, 1.0, 1.0, 12);
    let ds = trustscore::synth::generate(&spec, 200).unwrap();
    let mut text = String::from("x,label\n");
    for (row, l) in ds.features().outer_iter().zip(ds.labels()) {
        text.push_str(&format!("{:?},{l}\n", row[0]));
    }
    text
}

#[test]
fn cv_alpha_matches_library() {
    let csv = gaussian_pair_csv();
    let dir = workdir(&[("train.csv", &csv)]);
    let out = run(
        dir.path(),
        &["cv-alpha", "--train", "train.csv", "--grid", "0,0.25", "--classifier", "knn", "--seed", "4", "--out", "cv.json"],
    );
    let summary = stdout_json(&out);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cv.json")).unwrap()).unwrap();
    assert_eq!(report["grid"], serde_json::json!([0.0, 0.25]));

    let ds = trustscore::dataset::load_csv(dir.path().join("train.csv"), "label").unwrap();
    let provider = |train: &trustscore::dataset::LabeledDataset, x: ndarray::ArrayView2<'_, f64>| {
        use trustscore::models::Classifier;
        trustscore::models::KnnClassifier::new(train, 10)?.predict_all(x)
    };
    let expected = trustscore::trust::cross_validate_alpha(&ds, &provider, &[0.0, 0.25], 10, 4, 4).unwrap();
    assert_eq!(summary["chosen_alpha"], expected.chosen_alpha);
    assert_eq!(report["rows"][1]["mean_metric"], expected.rows[1].mean_metric);
}

#[test]
fn cv_alpha_default_grid() {
    let csv = gaussian_pair_csv();
    let dir = workdir(&[("train.csv", &csv)]);
    let out = run(dir.path(), &["cv-alpha", "--train", "train.csv", "--out", "cv.json"]);
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cv.json")).unwrap()).unwrap();
    let grid: Vec<f64> = report["grid"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let mut expected = vec![0.0];
    expected.extend((1..=10).rev().map(|i| 2f64.powi(-i)));
    assert_eq!(grid, expected);
}

#[test]
fn synth_validate_single_trial_is_reproducible() {
    let dir = workdir(&[]);
    let args = ["synth-validate", "--family", "circle", "--ambient-dim", "3", "--alpha", "0.2", "--trials", "1", "--n-grid", "200,400", "--seed", "9", "--out", "a.json"];
    assert!(run(dir.path(), &args).status.success());
    let first = std::fs::read(dir.path().join("a.json")).unwrap();
    assert!(run(dir.path(), &args).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("a.json")).unwrap());
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["points"][0]["distances"].as_array().unwrap().len(), 1);
    assert!(report["uncorrected_oracle"].is_object());
}

#[test]
fn disagreement_filtering_and_pca_round_trip() {
    let csv = "a,b,label\n0,0,x\n0.1,0,x\n0,0.1,x\n5,5,x\n5,5.1,y\n5.1,5,y\n4.9,5,y\n0.05,0.05,y\n";
    let dir = workdir(&[("train.csv", csv), ("test.csv", "a,b\n0,0.05\n5,5\n"), ("preds.csv", "predicted,confidence\nx,1\ny,1\n")]);
    let out = run(
        dir.path(),
        &["fit", "--train", "train.csv", "--filtering", "disagreement", "--k", "3", "--standardize", "--pca-dims", "1", "--out", "m.json"],
    );
    let summary = stdout_json(&out);
    let kept: Vec<u64> = summary["classes"].as_array().unwrap().iter().map(|c| c["kept"].as_u64().unwrap()).collect();
    assert_eq!(kept, [3, 3]);
    let out = run(dir.path(), &["score", "--model", "m.json", "--test", "test.csv", "--predictions", "preds.csv", "--out", "s.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}
