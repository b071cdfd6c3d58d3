use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Session;
use crate::extraction::TokenCost;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub phase: String,
    pub seconds: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub total_s: f64,
    pub token_cost: Option<TokenCost>,
}

/// LLM time is the summed extraction latency; provisioning and execution
/// are the simulated durations.
pub fn timing_report(session: &Session) -> TimingReport {
    let t = &session.timings;
    let parts = [
        ("llm", t.llm_ms as f64 / 1000.0),
        ("provisioning", t.provisioning_s),
        ("execution", t.execution_s),
    ];
    let total_s: f64 = parts.iter().map(|(_, s)| s).sum();
    TimingReport {
        rows: parts
            .iter()
            .map(|(phase, seconds)| TimingRow {
                phase: phase.to_string(),
                seconds: *seconds,
                percent: if total_s > 0.0 { seconds / total_s * 100.0 } else { 0.0 },
            })
            .collect(),
        total_s,
        token_cost: t.token_cost.clone(),
    }
}

impl TimingReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>10} {:>7}", "phase", "seconds", "%");
        for r in &self.rows {
            let _ = writeln!(out, "{:<14} {:>10.2} {:>6.1}%", r.phase, r.seconds, r.percent);
        }
        let _ = writeln!(out, "{:<14} {:>10.2} {:>6.1}%", "total", self.total_s, 100.0);
        if let Some(c) = &self.token_cost {
            let _ = writeln!(
                out,
                "LLM cost: ${:.4} ({} prompt + {} completion tokens)",
                c.usd_estimate, c.prompt_tokens, c.completion_tokens
            );
        }
        out
    }
}
