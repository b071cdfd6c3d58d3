//! Execution sentinel: task state tracking, anomaly detection and run summaries.

mod simulator;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::composer::{TaskType, WorkflowDag};

pub use simulator::{simulate, FaultPlan, SimulatedRun, SimulatorConfig};

/// Detail carried by `failed` events for tasks whose dependency failed terminally.
pub const UPSTREAM_FAILED: &str = "upstream failed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Scheduled,
    Started,
    Progressed,
    Failed,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionEvent {
    /// Simulated seconds since the run started.
    pub at: f64,
    pub task_id: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    Stalled,
    RepeatedFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub task_id: String,
    pub evidence: String,
    pub raised_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SentinelConfig {
    pub repeated_failure_threshold: u32,
    pub stall_factor: f64,
    /// Stall threshold in seconds before any task has completed.
    pub stall_fallback_s: f64,
}

impl Default for SentinelConfig {
    fn default() -> Self {
        SentinelConfig {
            repeated_failure_threshold: 3,
            stall_factor: 5.0,
            stall_fallback_s: 120.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Scheduled,
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_type: TaskType,
    pub state: TaskState,
    pub failures: u32,
    pub last_event_at: Option<f64>,
    pub started_at: Option<f64>,
    pub completed_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SentinelError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("event {kind:?} for task `{task_id}` is out of order in state {state:?}")]
    OutOfOrderEvent {
        task_id: String,
        kind: EventKind,
        state: TaskState,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_tasks: usize,
    pub pending: usize,
    pub scheduled: usize,
    pub running: usize,
    pub completed: usize,
    pub failed: usize,
    pub in_flight: usize,
    pub anomalies: Vec<Anomaly>,
    pub wall_clock_s: f64,
    /// First start to last completion per task type.
    pub stage_durations_s: BTreeMap<String, f64>,
}

/// Per-run task states; mutated only through [`RunState::ingest`] and [`RunState::detect`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    tasks: BTreeMap<String, TaskRecord>,
    completed_durations: Vec<f64>,
    reported: BTreeSet<(AnomalyKind, String)>,
    anomalies: Vec<Anomaly>,
    last_at: f64,
}

impl RunState {
    pub fn new(dag: &WorkflowDag) -> Self {
        RunState {
            tasks: dag
                .tasks
                .iter()
                .map(|t| {
                    (
                        t.id.clone(),
                        TaskRecord {
                            task_type: t.task_type,
                            state: TaskState::Pending,
                            failures: 0,
                            last_event_at: None,
                            started_at: None,
                            completed_at: None,
                        },
                    )
                })
                .collect(),
            completed_durations: Vec::new(),
            reported: BTreeSet::new(),
            anomalies: Vec::new(),
            last_at: 0.0,
        }
    }

    pub fn task(&self, id: &str) -> Option<&TaskRecord> {
        self.tasks.get(id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = (&str, &TaskRecord)> {
        self.tasks.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Applies one event. Out-of-order events leave the state unchanged.
    pub fn ingest(&mut self, event: &ExecutionEvent) -> Result<(), SentinelError> {
        let rec = self
            .tasks
            .get_mut(&event.task_id)
            .ok_or_else(|| SentinelError::UnknownTask(event.task_id.clone()))?;
        use EventKind as E;
        use TaskState as S;
        let upstream = event.detail.as_deref() == Some(UPSTREAM_FAILED);
        let next = match (rec.state, event.kind) {
            (S::Pending | S::Failed, E::Scheduled) => S::Scheduled,
            (S::Scheduled, E::Started) => S::Running,
            (S::Running, E::Progressed) => S::Running,
            (S::Running, E::Completed) => S::Completed,
            (S::Running | S::Scheduled, E::Failed) => S::Failed,
            (S::Pending, E::Failed) if upstream => S::Failed,
            (state, kind) => {
                tracing::debug!(task = %event.task_id, ?kind, ?state, "out-of-order event ignored");
                return Err(SentinelError::OutOfOrderEvent {
                    task_id: event.task_id.clone(),
                    kind,
                    state,
                });
            }
        };
        match event.kind {
            E::Started => rec.started_at = Some(event.at),
            E::Completed => {
                rec.completed_at = Some(event.at);
                if let Some(s) = rec.started_at {
                    self.completed_durations.push(event.at - s);
                }
            }
            E::Failed if !upstream => rec.failures += 1,
            _ => {}
        }
        rec.state = next;
        rec.last_event_at = Some(event.at);
        self.last_at = self.last_at.max(event.at);
        Ok(())
    }

    fn stall_threshold(&self, config: &SentinelConfig) -> f64 {
        if self.completed_durations.is_empty() {
            return config.stall_fallback_s;
        }
        let mut d = self.completed_durations.clone();
        d.sort_by(f64::total_cmp);
        let n = d.len();
        let median = if n % 2 == 1 { d[n / 2] } else { (d[n / 2 - 1] + d[n / 2]) / 2.0 };
        (config.stall_factor * median).max(f64::EPSILON)
    }

    /// New anomalies at `now`. Each (kind, task) is reported at most once.
    pub fn detect(&mut self, now: f64, config: &SentinelConfig) -> Vec<Anomaly> {
        let threshold = self.stall_threshold(config);
        let mut found = Vec::new();
        for (id, rec) in &self.tasks {
            if rec.state == TaskState::Running {
                if let Some(last) = rec.last_event_at {
                    let silent = now - last;
                    if silent > threshold {
                        found.push(Anomaly {
                            kind: AnomalyKind::Stalled,
                            task_id: id.clone(),
                            evidence: format!("no event for {silent:.0} s (threshold {threshold:.0} s)"),
                            raised_at: now,
                        });
                    }
                }
            }
            if rec.failures >= config.repeated_failure_threshold {
                found.push(Anomaly {
                    kind: AnomalyKind::RepeatedFailure,
                    task_id: id.clone(),
                    evidence: format!("failed {} times", rec.failures),
                    raised_at: now,
                });
            }
        }
        found.retain(|a| self.reported.insert((a.kind, a.task_id.clone())));
        self.anomalies.extend(found.iter().cloned());
        found
    }

    pub fn anomalies(&self) -> &[Anomaly] {
        &self.anomalies
    }

    pub fn summarize(&self) -> RunSummary {
        let count = |s: TaskState| self.tasks.values().filter(|r| r.state == s).count();
        let completed = count(TaskState::Completed);
        let failed = count(TaskState::Failed);
        let mut stages: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for rec in self.tasks.values() {
            if let (Some(s), Some(e)) = (rec.started_at, rec.completed_at) {
                let span = stages.entry(rec.task_type.as_str().to_string()).or_insert((s, e));
                span.0 = span.0.min(s);
                span.1 = span.1.max(e);
            }
        }
        RunSummary {
            total_tasks: self.tasks.len(),
            pending: count(TaskState::Pending),
            scheduled: count(TaskState::Scheduled),
            running: count(TaskState::Running),
            completed,
            failed,
            in_flight: self.tasks.len() - completed - failed,
            anomalies: self.anomalies.clone(),
            wall_clock_s: self.last_at,
            stage_durations_s: stages.into_iter().map(|(k, (s, e))| (k, e - s)).collect(),
        }
    }
}

/// Appends events as JSON lines.
pub fn write_event_log(path: &Path, events: &[ExecutionEvent]) -> std::io::Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    for e in events {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_event_log(path: &Path) -> std::io::Result<Vec<ExecutionEvent>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composer::{generate_dag, GeneratorConfig, Measurements, UnitMeasurement};
    use crate::genome::Chromosome;
    use crate::intent::{AnalysisType, Focus, ResearchIntent};
    use chrono::Utc;

    pub(crate) fn small_dag(rows: u64) -> WorkflowDag {
        let intent = ResearchIntent {
            analysis_type: AnalysisType::SinglePopulation,
            populations: vec!["EUR".into()],
            chromosomes: Some(vec![Chromosome::parse("21").unwrap()]),
            regions: None,
            focus: Focus::AllVariants,
        };
        let m = Measurements {
            per_unit: vec![UnitMeasurement {
                chromosome: Chromosome::parse("21").unwrap(),
                region: None,
                rows,
                bytes: 0,
            }],
            total_vcpus: 8,
            measured_at: Utc::now(),
        };
        generate_dag(&intent, "fp", &m, &GeneratorConfig::default()).unwrap()
    }

    fn ev(at: f64, id: &str, kind: EventKind) -> ExecutionEvent {
        ExecutionEvent {
            at,
            task_id: id.into(),
            kind,
            detail: None,
        }
    }

    const T: &str = "sifting-chr21";

    #[test]
    fn lifecycle_counts() {
        let mut s = RunState::new(&small_dag(10));
        assert_eq!(s.summarize().completed, 0);
        for (at, k) in [(0.0, EventKind::Scheduled), (0.0, EventKind::Started), (5.0, EventKind::Completed)] {
            s.ingest(&ev(at, T, k)).unwrap();
        }
        let sum = s.summarize();
        assert_eq!(sum.completed, 1);
        assert_eq!(sum.completed + sum.failed + sum.in_flight, sum.total_tasks);
    }

    #[test]
    fn unknown_and_out_of_order() {
        let mut s = RunState::new(&small_dag(10));
        assert_eq!(s.ingest(&ev(0.0, "nope", EventKind::Started)), Err(SentinelError::UnknownTask("nope".into())));
        let before = s.clone();
        assert!(matches!(s.ingest(&ev(0.0, T, EventKind::Completed)), Err(SentinelError::OutOfOrderEvent { .. })));
        assert_eq!(s, before);
    }

    #[test]
    fn repeated_failure_raised_once() {
        let mut s = RunState::new(&small_dag(10));
        let cfg = SentinelConfig::default();
        for k in 0..3 {
            let t = k as f64;
            s.ingest(&ev(t, T, EventKind::Scheduled)).unwrap();
            s.ingest(&ev(t, T, EventKind::Started)).unwrap();
            s.ingest(&ev(t, T, EventKind::Failed)).unwrap();
            let found = s.detect(t, &cfg);
            assert_eq!(found.len(), usize::from(k == 2));
        }
        assert!(s.detect(10.0, &cfg).is_empty());
        assert_eq!(s.anomalies()[0].kind, AnomalyKind::RepeatedFailure);
    }

    #[test]
    fn stall_relative_to_median() {
        let dag = small_dag(10);
        let mut s = RunState::new(&dag);
        let cfg = SentinelConfig::default();
        let merge = "individuals_merge-chr21";
        for (at, k) in [(0.0, EventKind::Scheduled), (0.0, EventKind::Started), (10.0, EventKind::Completed)] {
            s.ingest(&ev(at, T, k)).unwrap();
        }
        s.ingest(&ev(10.0, merge, EventKind::Scheduled)).unwrap();
        s.ingest(&ev(10.0, merge, EventKind::Started)).unwrap();
        assert!(s.detect(50.0, &cfg).is_empty());
        let found = s.detect(10.0 + 100.0, &cfg);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, AnomalyKind::Stalled);
        assert!(s.detect(200.0, &cfg).is_empty());
    }

    #[test]
    fn event_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let events = vec![ev(0.0, T, EventKind::Scheduled), ev(1.5, T, EventKind::Started)];
        write_event_log(&path, &events).unwrap();
        assert_eq!(read_event_log(&path).unwrap(), events);
    }
}
