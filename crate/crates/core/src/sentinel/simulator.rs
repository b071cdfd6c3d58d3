//! Tick-based execution simulator that feeds the sentinel.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Anomaly, EventKind, ExecutionEvent, RunState, RunSummary, SentinelConfig, TaskState, UPSTREAM_FAILED};
use crate::composer::{CostModel, WorkflowDag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatorConfig {
    pub tick_s: f64,
    pub heartbeat_s: f64,
    /// Attempts per task before it fails terminally.
    pub max_attempts: u32,
    /// Executor kills attempts that run longer than this.
    pub task_timeout_s: f64,
    /// Hard stop for the simulated clock.
    pub max_sim_s: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            tick_s: 1.0,
            heartbeat_s: 10.0,
            max_attempts: 3,
            task_timeout_s: 600.0,
            max_sim_s: 1.0e6,
        }
    }
}

/// Injected faults. Everything is deterministic for a given seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultPlan {
    /// Task id to the number of leading attempts that fail.
    pub fail_attempts: BTreeMap<String, u32>,
    /// Tasks whose attempts never finish and send no heartbeats.
    pub hang: BTreeSet<String>,
    pub random_failure_rate: f64,
    pub seed: u64,
}

impl FaultPlan {
    pub fn none() -> Self {
        FaultPlan::default()
    }

    pub fn is_empty(&self) -> bool {
        self.fail_attempts.is_empty() && self.hang.is_empty() && self.random_failure_rate <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRun {
    pub events: Vec<ExecutionEvent>,
    pub anomalies: Vec<Anomaly>,
    pub summary: RunSummary,
    /// True when `max_sim_s` cut the run short.
    pub truncated: bool,
}

struct Attempt {
    end_tick: u64,
    fails: bool,
    hung: bool,
    next_beat: u64,
}

/// Runs the DAG on `vcpus` single-slot workers until every task is terminal.
pub fn simulate(
    dag: &WorkflowDag,
    vcpus: u32,
    cost: &CostModel,
    config: &SimulatorConfig,
    sentinel: &SentinelConfig,
    faults: &FaultPlan,
) -> SimulatedRun {
    let tick_s = config.tick_s.max(1e-3);
    let to_ticks = |s: f64| ((s / tick_s).ceil() as u64).max(1);
    let deps = dag.dependencies();
    let durations: HashMap<&str, u64> = dag.tasks.iter().map(|t| (t.id.as_str(), to_ticks(cost.duration_s(t)))).collect();
    let mut ids: Vec<&str> = dag.tasks.iter().map(|t| t.id.as_str()).collect();
    ids.sort_unstable();

    let mut rng = ChaCha8Rng::seed_from_u64(faults.seed);
    let mut state = RunState::new(dag);
    let mut events = Vec::new();
    let mut anomalies = Vec::new();
    let mut running: BTreeMap<&str, Attempt> = BTreeMap::new();
    let mut attempts: HashMap<&str, u32> = HashMap::new();
    let mut dead: BTreeSet<&str> = BTreeSet::new();
    let slots = vcpus.max(1) as usize;
    let beat = to_ticks(config.heartbeat_s);
    let timeout = to_ticks(config.task_timeout_s);
    let max_tick = (config.max_sim_s / tick_s) as u64;

    let emit = |state: &mut RunState, events: &mut Vec<ExecutionEvent>, tick: u64, id: &str, kind, detail: Option<&str>| {
        let e = ExecutionEvent {
            at: tick as f64 * tick_s,
            task_id: id.to_string(),
            kind,
            detail: detail.map(str::to_string),
        };
        state.ingest(&e).expect("simulator emits events in lifecycle order");
        events.push(e);
    };

    let mut tick = 0u64;
    let truncated = loop {
        let finished: Vec<&str> = running.iter().filter(|(_, a)| a.end_tick <= tick).map(|(id, _)| *id).collect();
        for id in finished {
            let a = running.remove(id).unwrap();
            if a.fails {
                let detail = if a.hung { "timed out" } else { "exit status 1" };
                emit(&mut state, &mut events, tick, id, EventKind::Failed, Some(detail));
                if attempts[id] >= config.max_attempts {
                    dead.insert(id);
                }
            } else {
                emit(&mut state, &mut events, tick, id, EventKind::Completed, None);
            }
        }
        for (id, a) in running.iter_mut() {
            if !a.hung && a.next_beat <= tick {
                a.next_beat = tick + beat;
                emit(&mut state, &mut events, tick, id, EventKind::Progressed, None);
            }
        }

        // Tasks downstream of a terminal failure can never run.
        loop {
            let blocked: Vec<&str> = ids
                .iter()
                .copied()
                .filter(|id| state.task(id).unwrap().state == TaskState::Pending)
                .filter(|id| deps[id].iter().any(|d| dead.contains(d)))
                .collect();
            if blocked.is_empty() {
                break;
            }
            for id in blocked {
                emit(&mut state, &mut events, tick, id, EventKind::Failed, Some(UPSTREAM_FAILED));
                dead.insert(id);
            }
        }

        let ready: Vec<&str> = ids
            .iter()
            .copied()
            .filter(|id| !running.contains_key(id) && !dead.contains(id))
            .filter(|id| matches!(state.task(id).unwrap().state, TaskState::Pending | TaskState::Failed))
            .filter(|id| deps[id].iter().all(|d| state.task(d).unwrap().state == TaskState::Completed))
            .take(slots.saturating_sub(running.len()))
            .collect();
        for id in ready {
            let n = attempts.entry(id).or_insert(0);
            *n += 1;
            let hung = faults.hang.contains(id);
            let injected = faults.fail_attempts.get(id).is_some_and(|k| *n <= *k);
            let random = faults.random_failure_rate > 0.0 && rng.random_bool(faults.random_failure_rate.min(1.0));
            let end_tick = if hung { tick + timeout } else { tick + durations[id] };
            running.insert(
                id,
                Attempt {
                    end_tick,
                    fails: hung || injected || random,
                    hung,
                    next_beat: tick + beat,
                },
            );
            emit(&mut state, &mut events, tick, id, EventKind::Scheduled, None);
            emit(&mut state, &mut events, tick, id, EventKind::Started, None);
        }

        anomalies.extend(state.detect(tick as f64 * tick_s, sentinel));

        let done = ids
            .iter()
            .all(|id| state.task(id).unwrap().state == TaskState::Completed || dead.contains(id));
        if done {
            break false;
        }
        if tick >= max_tick {
            break true;
        }
        tick += 1;
    };

    SimulatedRun {
        summary: state.summarize(),
        events,
        anomalies,
        truncated,
    }
}
