use std::path::Path;
use std::process::{Command, Output};

use farecast::ingest::SplitConfig;
use farecast::metrics::RandomBenchmark;
use farecast::pipeline::{make_report, Corpus, ModelBundle};
use farecast::report::to_report_json;
use serde_json::Value;

fn farecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_farecast")).args(args).output().unwrap()
}

fn error_kind(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&out.stderr)));
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

fn path(dir: &Path, f: &str) -> String {
    dir.join(f).to_str().unwrap().to_string()
}

#[test]
fn unknown_command_is_a_usage_error() {
    let out = farecast(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "UnknownCommand");
    let out = farecast(&["backtest", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "UsageError");
}

#[test]
fn help_and_version_succeed() {
    for flag in ["--help", "--version"] {
        let out = farecast(&[flag]);
        assert_eq!(out.status.code(), Some(0), "{flag}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = farecast(&["backtest", "--quotes", &path(dir.path(), "missing.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "Io");

    std::fs::write(dir.path().join("bad.json"), r#"{"folds": 5, "bogus": 1}"#).unwrap();
    let out = farecast(&["--config", &path(dir.path(), "bad.json"), "gen-data", "--out", &path(dir.path(), "q.csv")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn loaded_model_backtest_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| path(dir.path(), f);
    std::fs::write(dir.path().join("config.json"), r#"{"grids": {"cart": [{"max_depth": 5}]}}"#).unwrap();
    let common = ["--seed", "3", "--config", &p("config.json")];
    let ok = |extra: &[&str]| {
        let out = farecast(&[&common[..], extra].concat());
        assert_eq!(out.status.code(), Some(0), "{extra:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["gen-data", "--out", &p("quotes.csv")]);
    ok(&["train", "--quotes", &p("quotes.csv"), "--model", "cart", "--save-model", &p("model.json"), "--out", &p("train.json")]);
    ok(&["backtest", "--quotes", &p("quotes.csv"), "--load-model", &p("model.json"), "--out", &p("report.json")]);
    let cli: Value = serde_json::from_str(&std::fs::read_to_string(p("report.json")).unwrap()).unwrap();

    let bundle = ModelBundle::load(p("model.json")).unwrap();
    let corpus = Corpus::load(p("quotes.csv"), &SplitConfig::default()).unwrap();
    let decisions = bundle.decide(&corpus.test).unwrap();
    let report = make_report("backtest", Value::Null, 3, Value::Null, &decisions, &corpus.test, RandomBenchmark::Expectation).unwrap();
    let ours: Value = serde_json::from_str(&to_report_json(&report).unwrap()).unwrap();
    for field in ["routes", "aggregate", "decisions"] {
        assert_eq!(cli[field], ours[field], "{field}");
    }
    assert_eq!(cli["seed"], 3);
    assert_eq!(cli["routes"].as_array().unwrap().len(), 8);
}
