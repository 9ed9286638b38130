use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn kgaug(dir: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgaug"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

#[test]
fn missing_config_key_exits_2_with_key_name() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"eval": {"results": "r.jsonl"}}"#).unwrap();
    let out = kgaug(dir.path(), &["--config", "c.json", "eval"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "missing-config-key");
    assert_eq!(err["key"], "eval.dataset");
    assert!(err["message"].as_str().unwrap().contains("eval.dataset"));
}

#[test]
fn missing_triples_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgaug(dir.path(), &["kg", "stats"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["key"], "kg.triples");
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"kg": {"tripels": "x"}}"#).unwrap();
    let out = kgaug(dir.path(), &["--config", "c.json", "kg", "stats"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "invalid-config");
}

#[test]
fn bad_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgaug(dir.path(), &["augment", "spqg", "--pairing", "diagonal"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
}

#[test]
fn runtime_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgaug(dir.path(), &["kg", "stats", "--triples", "absent.tsv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "run-failed");
}

#[test]
fn help_still_works() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgaug(dir.path(), &["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("augment"));
}
