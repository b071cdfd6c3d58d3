use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, TimeDelta, Utc};
use sha2::{Digest, Sha256};

use super::journal::{self, Entry, JournalEntry, ReplayError};
use super::{ConductorError, Context, Input, Outbound, Phase, RunRecord, Router, Session};
use crate::config::{Config, ConfigError, Provisioner};
use crate::deploy_sim::{provision, provision_external, FixtureDataset};
use crate::extraction::Extractor;
use crate::sentinel::{simulate, write_event_log};
use crate::skills::SkillSet;

pub trait Clock: Send + Sync + std::fmt::Debug {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock advancing a fixed step on every reading.
#[derive(Debug)]
pub struct StepClock {
    start: DateTime<Utc>,
    step_ms: i64,
    ticks: AtomicI64,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>, step_ms: i64) -> Self {
        StepClock {
            start,
            step_ms,
            ticks: AtomicI64::new(0),
        }
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + TimeDelta::milliseconds(n * self.step_ms)
    }
}

/// Session id derived from the query and a per-service counter.
pub fn session_id(query: &str, counter: u64) -> String {
    let digest = Sha256::digest(format!("{counter}\n{query}").as_bytes());
    format!("s-{}", &hex::encode(digest)[..16])
}

/// Runs sessions: applies inputs, performs effects, keeps journals.
#[derive(Debug)]
pub struct Engine {
    config: Config,
    skills: SkillSet,
    router: Router,
    fixtures: FixtureDataset,
    extractor: Extractor,
    clock: Arc<dyn Clock>,
    journal_dir: Option<PathBuf>,
}

impl Engine {
    pub fn from_config(config: Config) -> Result<Self, ConfigError> {
        let library = config.skill_library()?;
        let skills = crate::skills::select_skillset(config.conductor.skill_config, &library)?;
        Ok(Engine {
            router: Router::from_library(&library),
            fixtures: config.fixtures()?,
            extractor: config.extractor()?,
            skills,
            config,
            clock: Arc::new(SystemClock),
            journal_dir: None,
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Persists every journal entry to `<dir>/<session id>.jsonl`.
    pub fn with_journal_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.journal_dir = Some(dir.into());
        self
    }

    pub fn with_extractor(mut self, extractor: Extractor) -> Self {
        self.extractor = extractor;
        self
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn skills(&self) -> &SkillSet {
        &self.skills
    }

    pub fn extractor(&self) -> &Extractor {
        &self.extractor
    }

    pub fn router(&self) -> &Router {
        &self.router
    }

    pub fn journal_path(&self, session_id: &str) -> Option<PathBuf> {
        self.journal_dir.as_ref().map(|d| d.join(format!("{session_id}.jsonl")))
    }

    fn ctx(&self) -> Context<'_> {
        Context {
            skills: &self.skills,
            config: &self.config,
        }
    }

    fn persist(&self, session: &Session, entry: &JournalEntry) -> Result<(), ConductorError> {
        match self.journal_path(&session.id) {
            Some(path) => journal::append(&path, entry).map_err(|e| ConductorError::Journal(e.to_string())),
            None => Ok(()),
        }
    }

    pub fn open(&self, id: &str, query: &str) -> Result<(Session, Vec<Outbound>), ConductorError> {
        let at = self.clock.now();
        let domain = self.router.route(query);
        let (mut session, out) = Session::open(id, query, domain, &self.skills, at);
        let entry = JournalEntry {
            seq: 0,
            at,
            entry: Entry::Open {
                session_id: id.to_string(),
                query: query.to_string(),
                domain: domain.map(str::to_string),
                skill_config: self.skills.config(),
                skill_fingerprint: self.skills.fingerprint().to_string(),
            },
        };
        self.persist(&session, &entry)?;
        session.journal.push(entry);
        Ok((session, out))
    }

    /// Applies one input, journaling it only if it was accepted and persisted.
    pub fn apply(&self, session: &mut Session, input: Input) -> Result<Vec<Outbound>, ConductorError> {
        let at = self.clock.now();
        let mut next = session.clone();
        let out = next.apply(&self.ctx(), &input, at)?;
        let entry = JournalEntry {
            seq: session.journal.len() as u64,
            at,
            entry: Entry::Input { input },
        };
        self.persist(session, &entry)?;
        next.journal.push(entry);
        *session = next;
        Ok(out)
    }

    /// Performs the side effect the current phase waits on, if any.
    pub async fn effect(&self, session: &Session) -> Option<Input> {
        match session.phase {
            Phase::Planning => Some(match self.extractor.extract(&session.merged_context(), &self.skills).await {
                Ok(result) => Input::Extracted { result },
                Err(e) => Input::ExtractionFailed { cause: e.to_string() },
            }),
            Phase::Provisioning => Some(self.provision(session)),
            Phase::Executing => Some(self.execute(session)),
            _ => None,
        }
    }

    fn provision(&self, session: &Session) -> Input {
        let Some(plan) = &session.plan else {
            return Input::ProvisionFailed {
                cause: "no plan to provision".into(),
            };
        };
        let vcpus = self.config.deploy.vcpus;
        let now = self.clock.now();
        let result = match self.config.conductor.provisioner {
            Provisioner::Fixtures => provision(&session.id, &plan.staging, &self.fixtures, vcpus, now, &self.config.deploy),
            Provisioner::External => provision_external(
                &session.id,
                &plan.staging,
                self.config.staging_hook().as_deref(),
                vcpus,
                now,
                &self.config.deploy,
            ),
        };
        match result {
            Ok(result) => Input::Provisioned { result },
            Err(e) => Input::ProvisionFailed { cause: e.to_string() },
        }
    }

    fn execute(&self, session: &Session) -> Input {
        // ExecutionApproval is only reachable with a generated DAG.
        let dag = session.dag.as_ref().expect("executing session has a DAG");
        let c = &self.config;
        let run = simulate(dag, dag.metadata.total_vcpus, &c.cost, &c.simulator, &c.sentinel, &c.faults);
        if let Some(dir) = &self.journal_dir {
            let path = dir.join(format!("{}.events.jsonl", session.id));
            if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| write_event_log(&path, &run.events)) {
                tracing::warn!(path = %path.display(), error = %e, "cannot write execution event log");
            }
        }
        Input::RunFinished {
            run: RunRecord {
                event_count: run.events.len(),
                summary: run.summary,
                anomalies: run.anomalies,
                truncated: run.truncated,
            },
        }
    }

    /// Runs effects until the session waits for the user or terminates.
    pub async fn advance(&self, session: &mut Session) -> Result<Vec<Outbound>, ConductorError> {
        let mut out = Vec::new();
        while let Some(input) = self.effect(session).await {
            out.extend(self.apply(session, input)?);
        }
        Ok(out)
    }

    /// A user action followed by every effect it unlocks.
    pub async fn act(&self, session: &mut Session, action: Input) -> Result<Vec<Outbound>, ConductorError> {
        if !action.is_user_action() {
            return Err(ConductorError::IllegalAction {
                phase: session.phase,
                action: action.name().to_string(),
            });
        }
        let mut out = self.apply(session, action)?;
        out.extend(self.advance(session).await?);
        Ok(out)
    }

    /// Opens a session and approves both gates synthetically.
    /// Stops early if the session needs a clarification.
    pub async fn run_auto(&self, id: &str, query: &str) -> Result<Session, ConductorError> {
        let (mut s, _) = self.open(id, query)?;
        self.advance(&mut s).await?;
        loop {
            let action = match s.phase {
                Phase::PlanValidation => Input::ApprovePlan {
                    by: "auto".into(),
                    synthetic: true,
                },
                Phase::ExecutionApproval => Input::ApproveExecution {
                    by: "auto".into(),
                    synthetic: true,
                },
                _ => return Ok(s),
            };
            self.act(&mut s, action).await?;
        }
    }

    pub fn replay(&self, entries: &[JournalEntry]) -> Result<Session, ReplayError> {
        journal::replay(entries, &self.ctx())
    }

    pub fn replay_file(&self, path: &Path) -> Result<Session, ReplayError> {
        self.replay(&journal::read_journal(path)?)
    }
}
