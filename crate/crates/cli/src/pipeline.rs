//! `run` and `serve`: the conductor pipeline over HTTP.

use std::collections::VecDeque;
use std::io::{BufRead, IsTerminal, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use intent2dag_client::{is_unreachable, Client, ClientError};
use intent2dag_core::api::{ApproveBody, RejectBody};
use intent2dag_core::composer::human_bytes;
use intent2dag_core::conductor::{Engine, Phase, Session};
use intent2dag_core::config::Config;
use serde_json::json;

use crate::{print_json, Cli, CliError, RunArgs, ServeArgs};

fn client_error(e: ClientError) -> CliError {
    if is_unreachable(&e) {
        CliError::Unreachable(e.to_string())
    } else {
        CliError::Domain(e.to_string())
    }
}

fn engine(config: Config) -> Result<Engine, CliError> {
    let journals = config.sessions_dir();
    Ok(Engine::from_config(config)?.with_journal_dir(journals))
}

enum Decision {
    Approve,
    Revise(String),
    Reject,
}

fn prompt(question: &str) -> Result<String, CliError> {
    eprint!("{question} ");
    std::io::stderr().flush()?;
    let mut line = String::new();
    if std::io::stdin().lock().read_line(&mut line)? == 0 {
        return Err(CliError::Domain("input closed while waiting for an answer".into()));
    }
    Ok(line.trim().to_string())
}

fn decide(gate: &str, allow_revise: bool) -> Result<Decision, CliError> {
    let options = if allow_revise {
        "[a]pprove, [r]evise <text>, [x] reject"
    } else {
        "[a]pprove, [x] reject"
    };
    loop {
        let answer = prompt(&format!("{gate}? {options}:"))?;
        let (head, rest) = answer.split_once(' ').unwrap_or((answer.as_str(), ""));
        match head {
            "a" | "approve" | "y" | "yes" => return Ok(Decision::Approve),
            "x" | "reject" | "n" | "no" => return Ok(Decision::Reject),
            "r" | "revise" if allow_revise && !rest.trim().is_empty() => return Ok(Decision::Revise(rest.trim().to_string())),
            _ => eprintln!("unrecognized answer"),
        }
    }
}

fn print_plan(s: &Session) {
    if let Some(plan) = &s.plan {
        println!("Plan for session {}:", s.id);
        print!("{}", plan.description);
    }
}

fn print_approval(s: &Session) {
    if let Some(a) = &s.approval_summary {
        println!(
            "Workflow: {} tasks ({}), peak storage {}, projected runtime {:.0} s on {} vCPUs",
            a.task_count,
            a.tasks_by_type
                .iter()
                .filter(|(_, n)| **n > 0)
                .map(|(t, n)| format!("{n} {t}"))
                .collect::<Vec<_>>()
                .join(", "),
            human_bytes(a.est_peak_storage_bytes),
            a.projected_runtime_s,
            a.total_vcpus
        );
    }
}

async fn drive(client: &Client, args: &RunArgs, human: bool) -> Result<Session, CliError> {
    let timeout = Duration::from_secs(args.timeout_s);
    let interactive = !args.yes && std::io::stdin().is_terminal();
    let mut answers: VecDeque<String> = args.answers.iter().cloned().collect();
    let auto = || ApproveBody {
        by: Some("auto".into()),
        synthetic: true,
    };
    let created = client.create_session(&args.query).await.map_err(client_error)?;
    let id = created.id.clone();
    loop {
        let s = client.wait_settled(&id, timeout).await.map_err(client_error)?;
        match s.phase {
            Phase::AwaitingClarification => {
                let question = s.history.last().map(|m| m.text.clone()).unwrap_or_default();
                let answer = match answers.pop_front() {
                    Some(a) => a,
                    None if interactive => prompt(&format!("{question}\n>"))?,
                    None => {
                        return Err(CliError::Domain(format!(
                            "clarification needed: {question} (answer with --answer)"
                        )))
                    }
                };
                client.message(&id, &answer).await.map_err(client_error)?;
            }
            Phase::PlanValidation => {
                if human {
                    print_plan(&s);
                }
                let decision = if args.yes {
                    Decision::Approve
                } else if interactive {
                    decide("Approve plan", true)?
                } else {
                    return Err(CliError::Domain("plan awaits approval; rerun with --yes".into()));
                };
                match decision {
                    Decision::Approve => client.approve_plan(&id, &if args.yes { auto() } else { ApproveBody::default() }).await,
                    Decision::Revise(text) => client.message(&id, &text).await,
                    Decision::Reject => client.reject(&id, &RejectBody::default()).await,
                }
                .map_err(client_error)?;
            }
            Phase::ExecutionApproval => {
                if human {
                    print_approval(&s);
                }
                let decision = if args.yes {
                    Decision::Approve
                } else if interactive {
                    decide("Start execution", false)?
                } else {
                    return Err(CliError::Domain("execution awaits approval; rerun with --yes".into()));
                };
                match decision {
                    Decision::Approve => {
                        client
                            .approve_execution(&id, &if args.yes { auto() } else { ApproveBody::default() })
                            .await
                    }
                    _ => client.reject(&id, &RejectBody::default()).await,
                }
                .map_err(client_error)?;
            }
            _ => return Ok(s),
        }
    }
}

pub async fn run(cli: &Cli, args: &RunArgs, config: Config) -> Result<(), CliError> {
    let workflows = config.workspace.join("workflows");
    let (client, _server) = match &args.server {
        Some(url) => (Client::new(url.clone()), None),
        None => {
            let engine = Arc::new(engine(config)?);
            let addr: SocketAddr = "127.0.0.1:0".parse().expect("literal address");
            let (local, task) = intent2dag_server::spawn(engine, addr).await?;
            (Client::new(format!("http://{local}")), Some(task))
        }
    };
    client.health().await.map_err(client_error)?;
    let s = drive(&client, args, !cli.json).await?;
    let timing = client.timing(&s.id).await.map_err(client_error)?;

    let mut workflow_path: Option<PathBuf> = None;
    if s.dag.is_some() {
        let bytes = client.workflow(&s.id).await.map_err(client_error)?;
        let path = args.out.clone().unwrap_or_else(|| workflows.join(format!("{}.json", s.id)));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        workflow_path = Some(path);
    }

    if cli.json {
        print_json(&json!({
            "session_id": s.id,
            "phase": s.phase,
            "reason": s.reason,
            "intent": s.intent,
            "intent_hash": s.intent_hash,
            "workflow": workflow_path,
            "run": s.run.as_ref().map(|r| &r.summary),
            "timing": timing,
            "provenance": s.provenance,
        }));
    } else {
        if let Some(run) = &s.run {
            println!(
                "Run: {} completed, {} failed, {} anomalies, {:.0} s simulated",
                run.summary.completed,
                run.summary.failed,
                run.anomalies.len(),
                run.summary.wall_clock_s
            );
        }
        if let Some(p) = &workflow_path {
            println!("Workflow written to {}", p.display());
        }
        println!("Timing:");
        print!("{}", timing.render());
        println!("Session {} {}", s.id, s.phase);
    }
    match s.phase {
        Phase::Completed => Ok(()),
        phase => Err(CliError::Reported(format!(
            "session {} ended {phase}: {}",
            s.id,
            s.reason.as_deref().unwrap_or("no reason recorded")
        ))),
    }
}

pub async fn serve(args: &ServeArgs, config: Config) -> Result<(), CliError> {
    let engine = Arc::new(engine(config)?);
    let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    intent2dag_server::serve(listener, engine, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
