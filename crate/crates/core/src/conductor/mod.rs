//! Session state machine with the plan and execution approval gates.
//!
//! [`Session::apply`] is pure: every side effect (extraction, provisioning,
//! execution) happens in [`Engine`] and comes back as an [`Input`]. The
//! journal of inputs therefore replays to the identical session.

mod engine;
mod journal;
mod routing;
mod timing;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composer::{
    generate_dag, plan_advisory, serialize_dag, summarize_for_approval, AdvisoryPlan, ApprovalSummary,
    WorkflowDag,
};
use crate::config::Config;
use crate::deploy_sim::ProvisionResult;
use crate::extraction::{ExtractionResult, MissingField, Outcome, TokenCost, CORRECTION_SEPARATOR};
use crate::intent::{intent_hash, ResearchIntent};
use crate::sentinel::{Anomaly, RunSummary};
use crate::skills::{SkillConfig, SkillSet};

pub use engine::{session_id, Clock, Engine, StepClock, SystemClock};
pub use journal::{read_journal, Entry, JournalEntry, ReplayError};
pub use routing::Router;
pub use timing::{timing_report, TimingReport, TimingRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Routing,
    Planning,
    AwaitingClarification,
    PlanValidation,
    Provisioning,
    DeferredGeneration,
    ExecutionApproval,
    Executing,
    Completed,
    Failed,
    Rejected,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Completed | Phase::Failed | Phase::Rejected)
    }

    /// Phases in which the session waits for the user.
    pub fn awaits_user(self) -> bool {
        matches!(
            self,
            Phase::AwaitingClarification | Phase::PlanValidation | Phase::ExecutionApproval
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Routing => "routing",
            Phase::Planning => "planning",
            Phase::AwaitingClarification => "awaiting_clarification",
            Phase::PlanValidation => "plan_validation",
            Phase::Provisioning => "provisioning",
            Phase::DeferredGeneration => "deferred_generation",
            Phase::ExecutionApproval => "execution_approval",
            Phase::Executing => "executing",
            Phase::Completed => "completed",
            Phase::Failed => "failed",
            Phase::Rejected => "rejected",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Plan,
    Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApprovalRecord {
    pub gate: Gate,
    pub by: String,
    pub at: DateTime<Utc>,
    /// Hash of what was approved: the intent for the plan gate, the DAG bytes for execution.
    pub subject: String,
    /// Issued by auto-approve mode rather than a person.
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub summary: RunSummary,
    pub anomalies: Vec<Anomaly>,
    pub event_count: usize,
    pub truncated: bool,
}

/// Everything that drives a session forward, user actions and effect results alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "snake_case")]
pub enum Input {
    /// Clarification answer or plan revision.
    Message { text: String },
    ApprovePlan {
        by: String,
        #[serde(default)]
        synthetic: bool,
    },
    ApproveExecution {
        by: String,
        #[serde(default)]
        synthetic: bool,
    },
    Reject {
        by: String,
        #[serde(default)]
        reason: Option<String>,
    },
    Extracted { result: ExtractionResult },
    ExtractionFailed { cause: String },
    Provisioned { result: ProvisionResult },
    ProvisionFailed { cause: String },
    RunFinished { run: RunRecord },
}

impl Input {
    pub fn name(&self) -> &'static str {
        match self {
            Input::Message { .. } => "message",
            Input::ApprovePlan { .. } => "approve_plan",
            Input::ApproveExecution { .. } => "approve_execution",
            Input::Reject { .. } => "reject",
            Input::Extracted { .. } => "extracted",
            Input::ExtractionFailed { .. } => "extraction_failed",
            Input::Provisioned { .. } => "provisioned",
            Input::ProvisionFailed { .. } => "provision_failed",
            Input::RunFinished { .. } => "run_finished",
        }
    }

    pub fn is_user_action(&self) -> bool {
        matches!(
            self,
            Input::Message { .. } | Input::ApprovePlan { .. } | Input::ApproveExecution { .. } | Input::Reject { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    PhaseChanged { from: Phase, to: Phase },
    Clarification { question: String, missing_fields: Vec<MissingField>, round: u32 },
    PlanReady { description: String, intent_hash: String },
    ApprovalRequired { summary: ApprovalSummary },
    RunFinished { completed: usize, failed: usize, anomalies: usize },
    Rejected { reason: String },
    Failed { cause: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum ConductorError {
    #[error("`{action}` is not allowed in phase {phase}")]
    IllegalAction { phase: Phase, action: String },
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("journal write failed: {0}")]
    Journal(String),
}

/// Hashes that pin what a terminal session composed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub skill_fingerprint: String,
    pub intent_hash: Option<String>,
    pub measurements_digest: Option<String>,
    pub dag_sha256: Option<String>,
}

/// Per-phase wall time plus the simulated and measured components.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub wall_s: BTreeMap<Phase, f64>,
    pub llm_ms: u64,
    pub provisioning_s: f64,
    pub execution_s: f64,
    pub token_cost: Option<TokenCost>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub phase: Phase,
    pub domain: Option<String>,
    pub query: String,
    pub corrections: Vec<String>,
    pub history: Vec<Message>,
    pub skill_config: SkillConfig,
    pub skill_fingerprint: String,
    pub clarification_rounds: u32,
    pub extraction: Option<ExtractionResult>,
    pub intent: Option<ResearchIntent>,
    pub intent_hash: Option<String>,
    pub plan: Option<AdvisoryPlan>,
    pub provision: Option<ProvisionResult>,
    pub dag: Option<WorkflowDag>,
    pub approval_summary: Option<ApprovalSummary>,
    pub approvals: Vec<ApprovalRecord>,
    pub run: Option<RunRecord>,
    pub timings: PhaseTimings,
    /// Why the session was rejected or failed.
    pub reason: Option<String>,
    pub provenance: Option<Provenance>,
    pub created_at: DateTime<Utc>,
    pub phase_entered_at: DateTime<Utc>,
    pub journal: Vec<JournalEntry>,
}

/// Original query plus corrections, each after [`CORRECTION_SEPARATOR`].
/// Empty corrections are dropped.
pub fn merge_revision<S: AsRef<str>>(original: &str, corrections: &[S]) -> String {
    let mut merged = original.to_string();
    for c in corrections {
        let c = c.as_ref().trim();
        if !c.is_empty() {
            merged.push_str(CORRECTION_SEPARATOR);
            merged.push_str(c);
        }
    }
    merged
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What [`Session::apply`] needs besides the session: pure, shared, read-only.
pub struct Context<'a> {
    pub skills: &'a SkillSet,
    pub config: &'a Config,
}

impl Session {
    /// A new session, routed. Unroutable queries are rejected immediately.
    pub fn open(id: &str, query: &str, domain: Option<&str>, skills: &SkillSet, at: DateTime<Utc>) -> (Session, Vec<Outbound>) {
        let mut s = Session {
            id: id.to_string(),
            phase: Phase::Routing,
            domain: domain.map(str::to_string),
            query: query.to_string(),
            corrections: Vec::new(),
            history: vec![Message {
                role: Role::User,
                text: query.to_string(),
                at,
            }],
            skill_config: skills.config(),
            skill_fingerprint: skills.fingerprint().to_string(),
            clarification_rounds: 0,
            extraction: None,
            intent: None,
            intent_hash: None,
            plan: None,
            provision: None,
            dag: None,
            approval_summary: None,
            approvals: Vec::new(),
            run: None,
            timings: PhaseTimings::default(),
            reason: None,
            provenance: None,
            created_at: at,
            phase_entered_at: at,
            journal: Vec::new(),
        };
        let mut out = Vec::new();
        match domain {
            Some(_) => s.transition(Phase::Planning, at, &mut out),
            None => s.reject("no registered domain matches the query".into(), at, &mut out),
        }
        (s, out)
    }

    /// The text handed to the extractor.
    pub fn merged_context(&self) -> String {
        merge_revision(&self.query, &self.corrections)
    }

    pub fn dag_bytes(&self) -> Option<Vec<u8>> {
        self.dag.as_ref().map(serialize_dag)
    }

    fn transition(&mut self, to: Phase, at: DateTime<Utc>, out: &mut Vec<Outbound>) {
        let elapsed = (at - self.phase_entered_at).num_milliseconds().max(0) as f64 / 1000.0;
        *self.timings.wall_s.entry(self.phase).or_default() += elapsed;
        out.push(Outbound::PhaseChanged { from: self.phase, to });
        self.phase = to;
        self.phase_entered_at = at;
        if to.is_terminal() {
            self.provenance = Some(Provenance {
                skill_fingerprint: self.skill_fingerprint.clone(),
                intent_hash: self.intent_hash.clone(),
                measurements_digest: self.provision.as_ref().map(|p| p.measurements.digest()),
                dag_sha256: self.dag_bytes().map(|b| sha256_hex(&b)),
            });
        }
    }

    fn say(&mut self, text: String, at: DateTime<Utc>) {
        self.history.push(Message { role: Role::System, text, at });
    }

    fn reject(&mut self, reason: String, at: DateTime<Utc>, out: &mut Vec<Outbound>) {
        self.say(format!("Rejected: {reason}"), at);
        self.reason = Some(reason.clone());
        self.transition(Phase::Rejected, at, out);
        out.push(Outbound::Rejected { reason });
    }

    fn fail(&mut self, cause: String, at: DateTime<Utc>, out: &mut Vec<Outbound>) {
        self.say(format!("Failed: {cause}"), at);
        self.reason = Some(cause.clone());
        self.transition(Phase::Failed, at, out);
        out.push(Outbound::Failed { cause });
    }

    /// Applies one input. Illegal inputs leave the session untouched.
    pub fn apply(&mut self, ctx: &Context<'_>, input: &Input, at: DateTime<Utc>) -> Result<Vec<Outbound>, ConductorError> {
        let mut out = Vec::new();
        match (self.phase, input) {
            (Phase::Planning, Input::Extracted { result }) => self.on_extracted(ctx, result, at, &mut out),
            (Phase::Planning, Input::ExtractionFailed { cause }) => {
                self.fail(format!("extraction: {cause}"), at, &mut out)
            }
            (Phase::AwaitingClarification | Phase::PlanValidation, Input::Message { text }) => {
                self.history.push(Message {
                    role: Role::User,
                    text: text.clone(),
                    at,
                });
                self.corrections.push(text.clone());
                self.transition(Phase::Planning, at, &mut out);
            }
            (Phase::PlanValidation, Input::ApprovePlan { by, synthetic }) => {
                self.approvals.push(ApprovalRecord {
                    gate: Gate::Plan,
                    by: by.clone(),
                    at,
                    subject: self.intent_hash.clone().unwrap_or_default(),
                    synthetic: *synthetic,
                });
                self.transition(Phase::Provisioning, at, &mut out);
            }
            (Phase::Provisioning, Input::Provisioned { result }) => self.on_provisioned(ctx, result, at, &mut out),
            (Phase::Provisioning, Input::ProvisionFailed { cause }) => {
                self.fail(format!("provisioning: {cause}"), at, &mut out)
            }
            (Phase::ExecutionApproval, Input::ApproveExecution { by, synthetic }) => {
                self.approvals.push(ApprovalRecord {
                    gate: Gate::Execution,
                    by: by.clone(),
                    at,
                    subject: self.dag_bytes().map(|b| sha256_hex(&b)).unwrap_or_default(),
                    synthetic: *synthetic,
                });
                self.transition(Phase::Executing, at, &mut out);
            }
            (Phase::Executing, Input::RunFinished { run }) => {
                self.timings.execution_s = run.summary.wall_clock_s;
                self.run = Some(run.clone());
                out.push(Outbound::RunFinished {
                    completed: run.summary.completed,
                    failed: run.summary.failed,
                    anomalies: run.anomalies.len(),
                });
                if run.summary.failed == 0 && !run.truncated {
                    self.say(
                        format!("Run completed: {} tasks in {:.0} s", run.summary.completed, run.summary.wall_clock_s),
                        at,
                    );
                    self.transition(Phase::Completed, at, &mut out);
                } else {
                    let cause = if run.truncated {
                        "run exceeded the simulation time limit".to_string()
                    } else {
                        format!("{} of {} tasks failed", run.summary.failed, run.summary.total_tasks)
                    };
                    self.fail(cause, at, &mut out);
                }
            }
            (
                Phase::AwaitingClarification | Phase::PlanValidation | Phase::ExecutionApproval,
                Input::Reject { by, reason },
            ) => {
                let reason = match reason {
                    Some(r) if !r.trim().is_empty() => format!("{by}: {r}"),
                    _ => format!("rejected by {by}"),
                };
                self.reject(reason, at, &mut out);
            }
            (phase, input) => {
                return Err(ConductorError::IllegalAction {
                    phase,
                    action: input.name().to_string(),
                })
            }
        }
        Ok(out)
    }

    fn on_extracted(&mut self, ctx: &Context<'_>, result: &ExtractionResult, at: DateTime<Utc>, out: &mut Vec<Outbound>) {
        self.timings.llm_ms += result.elapsed_ms;
        if let Some(cost) = &result.token_cost {
            let acc = self.timings.token_cost.get_or_insert(TokenCost {
                prompt_tokens: 0,
                completion_tokens: 0,
                usd_estimate: 0.0,
            });
            acc.prompt_tokens += cost.prompt_tokens;
            acc.completion_tokens += cost.completion_tokens;
            acc.usd_estimate += cost.usd_estimate;
        }
        self.extraction = Some(result.clone());
        match &result.outcome {
            Outcome::Intent(intent) => {
                let plan = match plan_advisory(intent, ctx.skills, &ctx.config.staging, &ctx.config.calibration) {
                    Ok(p) => p,
                    Err(e) => return self.fail(format!("planning: {e}"), at, out),
                };
                let hash = intent_hash(intent);
                self.intent = Some(intent.clone());
                self.intent_hash = Some(hash.clone());
                self.say(plan.description.clone(), at);
                out.push(Outbound::PlanReady {
                    description: plan.description.clone(),
                    intent_hash: hash,
                });
                self.plan = Some(plan);
                self.transition(Phase::PlanValidation, at, out);
            }
            Outcome::Clarification(c) => {
                self.clarification_rounds += 1;
                if self.clarification_rounds > ctx.config.conductor.max_clarification_rounds {
                    return self.reject(
                        format!(
                            "query still incomplete after {} clarification rounds",
                            ctx.config.conductor.max_clarification_rounds
                        ),
                        at,
                        out,
                    );
                }
                self.say(c.question.clone(), at);
                self.transition(Phase::AwaitingClarification, at, out);
                out.push(Outbound::Clarification {
                    question: c.question.clone(),
                    missing_fields: c.missing_fields.clone(),
                    round: self.clarification_rounds,
                });
            }
            Outcome::Rejection(r) => self.reject(r.message.clone(), at, out),
        }
    }

    fn on_provisioned(&mut self, ctx: &Context<'_>, result: &ProvisionResult, at: DateTime<Utc>, out: &mut Vec<Outbound>) {
        self.timings.provisioning_s = result.elapsed_sim_s;
        self.provision = Some(result.clone());
        self.transition(Phase::DeferredGeneration, at, out);
        let (Some(intent), Some(plan)) = (&self.intent, &self.plan) else {
            return self.fail("provisioned without an approved plan".into(), at, out);
        };
        let dag = match generate_dag(intent, &self.skill_fingerprint, &result.measurements, &ctx.config.generator_config()) {
            Ok(d) => d,
            Err(e) => return self.fail(format!("workflow generation: {e}"), at, out),
        };
        let summary = summarize_for_approval(&dag, &plan.staging, &ctx.config.cost);
        self.say(
            format!(
                "Workflow ready: {} tasks, peak storage {}, projected runtime {:.0} s on {} vCPUs",
                summary.task_count,
                crate::composer::human_bytes(summary.est_peak_storage_bytes),
                summary.projected_runtime_s,
                summary.total_vcpus
            ),
            at,
        );
        self.dag = Some(dag);
        self.approval_summary = Some(summary.clone());
        self.transition(Phase::ExecutionApproval, at, out);
        out.push(Outbound::ApprovalRequired { summary });
    }
}
