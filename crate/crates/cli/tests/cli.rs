//! Black-box tests of the `synthpass` binary: flag surface, exit codes,
//! stderr diagnostics and file outputs.

use std::path::{Path, PathBuf};

use assert_cmd::Command;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn synthpass() -> Command {
    Command::cargo_bin("synthpass").unwrap()
}

#[test]
fn generate_single_subject() {
    let dir = tempfile::tempdir().unwrap();
    synthpass()
        .args(["generate", "--count", "1", "--seed", "3", "--scale", "0.5"])
        .arg("--config")
        .arg(fixtures().join("pol"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success();
    assert!(dir.path().join("images/pol_00000.png").is_file());
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 2, "header + one row");
    assert!(manifest.lines().nth(1).unwrap().starts_with("images/pol_00000.png,POL,0,bonafide,"));
    let receipt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_receipt.json")).unwrap())
            .unwrap();
    assert_eq!(receipt["seed"], 3);
    assert_eq!(receipt["images"].as_object().unwrap().len(), 1);
}

#[test]
fn config_resolves_through_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty.png");
    synthpass()
        .env("SYNTHPASS_CONFIG_DIR", fixtures())
        .args(["inspect", "--config", "esp"])
        .arg("--render-empty")
        .arg(&out)
        .assert()
        .success()
        .stdout(predicates::str::contains("country      ESP"));
    assert!(out.is_file());
}

#[test]
fn missing_config_fails_with_diagnostic() {
    synthpass()
        .args(["inspect", "--config", "nowhere"])
        .assert()
        .failure()
        .stderr(predicates::str::contains("not found"));
}

#[test]
fn evaluate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    synthpass()
        .arg("evaluate")
        .arg("--scores")
        .arg(fixtures().join("scores/classifier_scores.csv"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success()
        .stdout(predicates::str::contains("EER"));
    for name in ["report.json", "report.txt", "det.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let det = std::fs::read_to_string(dir.path().join("det.csv")).unwrap();
    assert!(det.starts_with("apcer,bpcer,threshold\n"));
    assert!(det.contains("-inf"));
}

#[test]
fn evaluate_rejects_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("empty.csv");
    std::fs::write(&scores, "").unwrap();
    synthpass()
        .arg("evaluate")
        .arg("--scores")
        .arg(&scores)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .failure()
        .stderr(predicates::str::contains("line 1"));
}

#[test]
fn evaluate_rejects_single_class_file() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("attacks_only.csv");
    std::fs::write(&scores, "path,label,pai,score\na.png,attack,print,0.9\n").unwrap();
    synthpass()
        .arg("evaluate")
        .arg("--scores")
        .arg(&scores)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .failure()
        .stderr(predicates::str::contains("bona fide"));
}

#[test]
fn split_unknown_mode_is_usage_error() {
    synthpass()
        .args(["split", "--manifest", "x.csv", "--mode", "sideways", "--out", "y"])
        .assert()
        .failure()
        .stderr(predicates::str::contains("invalid value"));
}

#[test]
fn split_intra_and_loo_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::from("path,country,subject_id,label,pai\n");
    for country in ["ESP", "POL", "PRT"] {
        for subject in 0..10 {
            manifest.push_str(&format!("{country}/bf/{subject}.png,{country},{subject},bonafide,none\n"));
            manifest.push_str(&format!("{country}/pr/{subject}.png,{country},{subject},attack,print\n"));
            manifest.push_str(&format!("{country}/sc/{subject}.png,{country},{subject},attack,screen\n"));
        }
    }
    let manifest_path = dir.path().join("manifest.csv");
    std::fs::write(&manifest_path, &manifest).unwrap();

    let intra_out = dir.path().join("intra");
    synthpass()
        .args(["split", "--mode", "intra", "--seed", "1"])
        .arg("--manifest")
        .arg(&manifest_path)
        .arg("--out")
        .arg(&intra_out)
        .assert()
        .success();
    let rows = |name: &str, out: &Path| {
        std::fs::read_to_string(out.join(name)).unwrap().lines().count() - 1
    };
    assert_eq!(rows("train.csv", &intra_out), 54);
    assert_eq!(rows("validation.csv", &intra_out), 18);
    assert_eq!(rows("test.csv", &intra_out), 18);
    assert_eq!(rows("excluded.csv", &intra_out), 0);

    let loo_out = dir.path().join("loo");
    synthpass()
        .args(["split", "--mode", "loo", "--seed", "1", "--test-country", "POL", "--test-pai", "print"])
        .arg("--manifest")
        .arg(&manifest_path)
        .arg("--out")
        .arg(&loo_out)
        .assert()
        .success();
    assert_eq!(rows("test.csv", &loo_out), 20);
    assert_eq!(rows("excluded.csv", &loo_out), 10);
    let test = std::fs::read_to_string(loo_out.join("test.csv")).unwrap();
    assert!(!test.contains("screen"));
}

#[test]
fn loo_without_country_fails() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = dir.path().join("m.csv");
    std::fs::write(&manifest_path, "path,country,subject_id,label,pai\na,POL,0,bonafide,none\n")
        .unwrap();
    synthpass()
        .args(["split", "--mode", "loo"])
        .arg("--manifest")
        .arg(&manifest_path)
        .arg("--out")
        .arg(dir.path().join("o"))
        .assert()
        .failure()
        .stderr(predicates::str::contains("--test-country"));
}

#[test]
fn filter_reports_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("filter.json");
    synthpass()
        .arg("filter")
        .arg("--faces-dir")
        .arg(fixtures().join("faces"))
        .arg("--out")
        .arg(&out)
        .assert()
        .success();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let subj = &report["subj001"];
    assert_eq!(subj["selected"].as_array().unwrap().len(), 3);
    assert_eq!(subj["shortfall"], false);
    assert_eq!(subj["reports"]["cand5.png"]["overall_pass"], false);
}
