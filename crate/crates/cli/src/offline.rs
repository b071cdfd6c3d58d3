//! Commands that run without the conductor service.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use intent2dag_core::assets;
use intent2dag_core::composer::{
    generate_dag, human_bytes, plan_advisory, serialize_dag, summarize_for_approval, Measurements,
};
use intent2dag_core::conductor::{Engine, ReplayError};
use intent2dag_core::config::{Config, ExtractorKind};
use intent2dag_core::deploy_sim::provision;
use intent2dag_core::evalharness::{load_dataset, parse_dataset, render_report, run_ablation, ReportFormat};
use intent2dag_core::extraction::Outcome;
use intent2dag_core::intent::{intent_hash, validate, ResearchIntent};
use intent2dag_core::skills::{lint_dir, lint_library, select_skillset, SkillConfig};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::{load_config, print_json, Cli, CliError, ComposeArgs, EvalArgs};

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

pub fn lint(cli: &Cli, dir: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(cli, None)?;
    let (source, findings) = match (dir, &config.paths.skills) {
        (Some(d), _) => (d.display().to_string(), lint_dir(d).map_err(|e| CliError::Io(e.to_string()))?),
        (None, Some(d)) => {
            let d = config.resolve(d);
            (d.display().to_string(), lint_dir(&d).map_err(|e| CliError::Io(e.to_string()))?)
        }
        (None, None) => ("bundled library".to_string(), lint_library(&assets::skill_library())),
    };
    if cli.json {
        print_json(&json!({ "source": source, "findings": findings }));
    } else if findings.is_empty() {
        println!("{source}: no findings");
    } else {
        for f in &findings {
            println!("{f}");
        }
    }
    if findings.is_empty() {
        Ok(())
    } else {
        Err(CliError::Reported(format!("{} lint finding(s) in {source}", findings.len())))
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

fn compose_intent(args: &ComposeArgs, config: &Config, skills: &intent2dag_core::skills::SkillSet) -> Result<ResearchIntent, CliError> {
    if let Some(path) = &args.intent {
        let raw: serde_json::Value =
            serde_json::from_str(&read_input(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        return validate(&raw, skills).map_err(|violations| {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            CliError::Domain(format!("invalid intent: {}", list.join("; ")))
        });
    }
    let query = args.query.as_deref().unwrap_or_default();
    let result = config.extractor()?.extract_blocking(query, skills).map_err(domain)?;
    match result.outcome {
        Outcome::Intent(i) => Ok(i),
        Outcome::Clarification(c) => Err(CliError::Domain(format!("clarification needed: {}", c.question))),
        Outcome::Rejection(r) => Err(CliError::Domain(format!("rejected: {}", r.message))),
    }
}

pub fn compose(cli: &Cli, args: &ComposeArgs, config: Config) -> Result<(), CliError> {
    let skills = config.skill_set()?;
    let intent = compose_intent(args, &config, &skills)?;
    let plan = plan_advisory(&intent, &skills, &config.staging, &config.calibration).map_err(domain)?;
    if args.plan_only {
        if cli.json {
            print_json(&plan);
        } else {
            print!("{}", plan.description);
        }
        return Ok(());
    }
    let measurements: Measurements = match &args.measurements {
        Some(path) => serde_json::from_str(&read_input(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => {
            let at = match &args.measured_at {
                Some(s) => DateTime::parse_from_rfc3339(s)
                    .map_err(|e| CliError::Usage(format!("--measured-at: {e}")))?
                    .with_timezone(&Utc),
                None => Utc::now(),
            };
            provision("compose", &plan.staging, &config.fixtures()?, config.deploy.vcpus, at, &config.deploy)
                .map_err(domain)?
                .measurements
        }
    };
    let dag = generate_dag(&intent, skills.fingerprint(), &measurements, &config.generator_config()).map_err(domain)?;
    let bytes = serialize_dag(&dag);
    let summary = summarize_for_approval(&dag, &plan.staging, &config.cost);
    match &args.out {
        Some(out) => {
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(out, &bytes)?;
            if cli.json {
                print_json(&json!({
                    "workflow": out,
                    "intent_hash": intent_hash(&intent),
                    "dag_sha256": hex::encode(Sha256::digest(&bytes)),
                    "summary": summary,
                }));
            } else {
                println!(
                    "{}: {} tasks, peak storage {}, projected runtime {:.0} s",
                    out.display(),
                    summary.task_count,
                    human_bytes(summary.est_peak_storage_bytes),
                    summary.projected_runtime_s
                );
            }
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

pub fn eval(cli: &Cli, args: &EvalArgs, config: Config) -> Result<(), CliError> {
    let library = config.skill_library()?;
    let reference = select_skillset(SkillConfig::S3, &library).map_err(|e| CliError::Io(e.to_string()))?;
    let dataset = args.dataset.clone().or_else(|| config.paths.dataset.as_ref().map(|p| config.resolve(p)));
    let cases = match &dataset {
        Some(path) => load_dataset(path, &reference),
        None => parse_dataset(assets::QUERIES_JSONL, &reference),
    }
    .map_err(|e| CliError::Io(e.to_string()))?;
    let format = if cli.json {
        ReportFormat::Json
    } else {
        args.report.parse::<ReportFormat>().map_err(CliError::Usage)?
    };
    let report = run_ablation(&cases, &args.configs, &library, &config.extractor()?).map_err(|e| CliError::Io(e.to_string()))?;
    let text = render_report(&report, format);
    match &args.out {
        Some(out) => std::fs::write(out, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn replay(cli: &Cli, journal: &Path, mut config: Config) -> Result<(), CliError> {
    // Replay never extracts; avoid requiring LLM credentials.
    config.conductor.extractor = ExtractorKind::Rule;
    let engine = Engine::from_config(config)?;
    let session = engine.replay_file(journal).map_err(|e| match e {
        ReplayError::Io(e) => CliError::Io(format!("{}: {e}", journal.display())),
        other => CliError::Domain(other.to_string()),
    })?;
    let dag_sha = session.dag_bytes().map(|b| hex::encode(Sha256::digest(b)));
    if cli.json {
        print_json(&json!({
            "session_id": session.id,
            "phase": session.phase,
            "intent_hash": session.intent_hash,
            "dag_sha256": dag_sha,
            "provenance": session.provenance,
            "journal_entries": session.journal.len(),
        }));
    } else {
        println!("session       {}", session.id);
        println!("phase         {}", session.phase);
        println!("intent hash   {}", session.intent_hash.as_deref().unwrap_or("-"));
        println!("skills        {} {}", session.skill_config, session.skill_fingerprint);
        if let Some(p) = &session.provenance {
            println!("measurements  {}", p.measurements_digest.as_deref().unwrap_or("-"));
        }
        println!("dag sha256    {}", dag_sha.as_deref().unwrap_or("-"));
    }
    Ok(())
}
