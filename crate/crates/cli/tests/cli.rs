use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fitzloss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fitzloss")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn synthetic_manifest(dir: &Path) -> String {
    let path = dir.join("m.toml");
    fs::write(
        &path,
        "[[dataset]]\nname = \"syn\"\nformat = \"synthetic\"\nn = 150\nd = 6\nk = 3\nnoise = 0.1\nseed = 4\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn eval_prints_the_worked_examples() {
    let r = json(&fitzloss(&["eval", "--loss", "fitzpatrick-sparsemax", "--y", "1,0", "--theta", "0,0"]));
    assert_eq!(r["value"], 0.125);
    assert_eq!(r["y_star"], serde_json::json!([0.75, 0.25]));

    let r = json(&fitzloss(&["eval", "--loss", "fitzpatrick-logistic", "--y", "1,0", "--theta", "0,0"]));
    assert!((r["lambda_star"].as_f64().unwrap() - 1.524_124_324_657_529_3).abs() < 1e-12);
    assert!((r["value"].as_f64().unwrap() - 0.278_464_542_761_073_8).abs() < 1e-12);

    let r = json(&fitzloss(&["eval", "--loss", "squared", "--y", "1,-2", "--theta", "-1,0.5"]));
    assert_eq!(r["value"], 0.5 * (4.0 + 6.25));
    assert!(r.get("lambda_star").is_none());
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["eval", "--loss", "nope", "--y", "1,0", "--theta", "0,0"][..],
        &["eval", "--loss", "sparsemax", "--y", "1,x", "--theta", "0,0"],
        &["check", "--suite", "bogus"],
        &["curve", "--generator", "logistic", "--out", "x.csv", "--s-range", "3"],
        &["frobnicate"],
    ] {
        assert_eq!(fitzloss(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn domain_errors_exit_with_one() {
    let out = fitzloss(&["eval", "--loss", "sparsemax", "--y", "0.7,0.7", "--theta", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = fitzloss(&["eval", "--loss", "logistic", "--y", "1,0,0", "--theta", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_suites_pass() {
    let out = fitzloss(&["check", "--suite", "goldens"]);
    assert!(out.status.success());
    let out = fitzloss(&["--sequential", "check", "--suite", "all", "--trials", "20", "--resolution", "80"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.trim_end().ends_with("properties passed"));
}

#[test]
fn training_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic_manifest(dir.path());
    let mut models = Vec::new();
    for (i, mode) in ["--sequential", "--threads=1"].iter().enumerate() {
        let model = dir.path().join(format!("model{i}.txt"));
        let r = json(&fitzloss(&[
            mode,
            "train",
            "--manifest",
            &manifest,
            "--dataset",
            "syn",
            "--loss",
            "fitzpatrick-logistic",
            "--lambda",
            "0.1",
            "--seed",
            "3",
            "--out",
            model.to_str().unwrap(),
        ]));
        assert_eq!(r["converged"], true);
        assert!(r["test_mse"].as_f64().unwrap() < 0.05);
        models.push(fs::read(&model).unwrap());
    }
    assert_eq!(models[0], models[1]);
    let header = String::from_utf8(models[0].clone()).unwrap();
    assert!(header.starts_with("3 6 fitzpatrick-logistic 0.1 3\n"), "{header}");
}

#[test]
fn huge_ridge_gives_near_zero_weights() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic_manifest(dir.path());
    let model = dir.path().join("model.txt");
    json(&fitzloss(&[
        "train",
        "--manifest",
        &manifest,
        "--dataset",
        "syn",
        "--loss",
        "sparsemax",
        "--lambda",
        "1e9",
        "--out",
        model.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&model).unwrap();
    let norm: f64 = text.lines().skip(1).flat_map(|l| l.split_whitespace()).map(|v| v.parse::<f64>().unwrap().powi(2)).sum();
    assert!(norm.sqrt() < 1e-3, "{norm}");
}

#[test]
fn single_lambda_grid_is_selected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic_manifest(dir.path());
    let out = dir.path().join("bench");
    let run = fitzloss(&[
        "benchmark",
        "--manifest",
        &manifest,
        "--losses",
        "squared,fitzpatrick-perceptron",
        "--lambda-grid",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    for r in report["datasets"][0]["results"].as_array().unwrap() {
        assert_eq!(r["best_lambda"], 0.5);
        assert_eq!(r["cells"].as_array().unwrap().len(), 1);
    }
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(table.starts_with("dataset,squared,fitzpatrick-perceptron\nsyn,"));
}

#[test]
fn missing_dataset_fails_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic_manifest(dir.path());
    let out = dir.path().join("bench");
    let run = fitzloss(&[
        "benchmark",
        "--manifest",
        &manifest,
        "--datasets",
        "syn,ghost",
        "--lambda-grid",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1));
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(table.contains("\nghost,NA,NA,NA,NA\n"), "{table}");
}
