use std::path::Path;
use std::process::{Command, Output, Stdio};

use intent2dag_core::assets;
use serde_json::Value;

fn run(workspace: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intent2dag"))
        .arg("--workspace")
        .arg(workspace)
        .args(args)
        .stdin(Stdio::null())
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn unknown_flag_is_usage_error() {
    let ws = tempfile::tempdir().unwrap();
    assert_eq!(run(ws.path(), &["--bogus"]).status.code(), Some(2));
    assert_eq!(run(ws.path(), &["run"]).status.code(), Some(2));
}

#[test]
fn bundled_skills_lint_clean() {
    let ws = tempfile::tempdir().unwrap();
    let out = run(ws.path(), &["--json", "skills", "lint"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["findings"], Value::Array(vec![]));
}

#[test]
fn lint_findings_exit_one() {
    let ws = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, src) in assets::skill_sources() {
        let src = if *name == "research_contexts.md" {
            src.replace("| CFTR |", "| XYZ1 |")
        } else {
            src.to_string()
        };
        std::fs::write(dir.path().join(name), src).unwrap();
    }
    let out = run(ws.path(), &["--json", "skills", "lint", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["findings"][0]["finding"], "dangling_region_reference");
}

#[test]
fn eval_reports_every_config() {
    let ws = tempfile::tempdir().unwrap();
    let out = run(ws.path(), &["--json", "eval", "--configs", "S0,S3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    let configs: Vec<&str> = report["configs"].as_array().unwrap().iter().map(|c| c["config"].as_str().unwrap()).collect();
    assert_eq!(configs, ["S0", "S3"]);
}

#[test]
fn compose_is_byte_stable() {
    let ws = tempfile::tempdir().unwrap();
    let args = [
        "compose",
        "--query",
        "Analyze BRCA1 in Finnish individuals",
        "--measured-at",
        "2026-01-05T09:00:00Z",
    ];
    let a = run(ws.path(), &args);
    let b = run(ws.path(), &args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let dag: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(!dag["tasks"].as_array().unwrap().is_empty());
}

#[test]
fn compose_plan_only_reports_staging() {
    let ws = tempfile::tempdir().unwrap();
    let out = run(ws.path(), &["--json", "compose", "--query", "Analyze HBB in EUR", "--plan-only"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["staging"]["actions"][0]["kind"], "region_extract");
}

#[test]
fn run_then_replay_agree() {
    let ws = tempfile::tempdir().unwrap();
    let out = run(ws.path(), &["--json", "run", "--yes", "-q", "Compare EUR and AFR on chromosome 21"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["phase"], "completed");
    let id = v["session_id"].as_str().unwrap();
    assert!(Path::new(v["workflow"].as_str().unwrap()).exists());

    let journal = ws.path().join("sessions").join(format!("{id}.jsonl"));
    let replayed = run(ws.path(), &["--json", "replay", journal.to_str().unwrap()]);
    assert_eq!(replayed.status.code(), Some(0));
    let r = json(&replayed);
    assert_eq!(r["phase"], "completed");
    assert_eq!(r["intent_hash"], v["intent_hash"]);
}

#[test]
fn clarification_without_answer_fails_then_answer_completes() {
    let ws = tempfile::tempdir().unwrap();
    let out = run(ws.path(), &["run", "--yes", "-q", "Analyze BRCA1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clarification needed"));

    let out = run(ws.path(), &["--json", "run", "--yes", "-q", "Analyze BRCA1", "--answer", "in Finnish individuals"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["intent"]["populations"], serde_json::json!(["FIN"]));
}

#[test]
fn out_of_domain_query_is_rejected() {
    let ws = tempfile::tempdir().unwrap();
    let out = run(ws.path(), &["--json", "run", "--yes", "-q", "What's the weather in Paris"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["phase"], "rejected");
}

#[test]
fn unreachable_server_exits_four() {
    let ws = tempfile::tempdir().unwrap();
    let out = run(ws.path(), &["run", "--yes", "-q", "Analyze chromosome 22", "--server", "http://127.0.0.1:9"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn missing_journal_is_io_error() {
    let ws = tempfile::tempdir().unwrap();
    let out = run(ws.path(), &["replay", ws.path().join("absent.jsonl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_is_io_error() {
    let ws = tempfile::tempdir().unwrap();
    std::fs::write(ws.path().join("config.toml"), "[unknown_section]\nx = 1\n").unwrap();
    let out = run(ws.path(), &["skills", "lint"]);
    assert_eq!(out.status.code(), Some(3));
}
