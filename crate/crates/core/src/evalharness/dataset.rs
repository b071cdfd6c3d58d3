use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::extraction::MissingField;
use crate::intent::{validate, IntentViolation, ResearchIntent};
use crate::skills::SkillSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl Tier {
    pub const ALL: [Tier; 5] = [Tier::T1, Tier::T2, Tier::T3, Tier::T4, Tier::T5];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::T1 => "T1",
            Tier::T2 => "T2",
            Tier::T3 => "T3",
            Tier::T4 => "T4",
            Tier::T5 => "T5",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown tier `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldOutcome {
    Intent(ResearchIntent),
    ExpectClarification(Vec<MissingField>),
    ExpectRejection(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gold {
    pub outcome: GoldOutcome,
    /// For adversarial cases: a reading under which a clean intent is also correct.
    pub alternate_intent: Option<ResearchIntent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCase {
    pub id: String,
    pub tier: Tier,
    pub query: String,
    pub gold: Gold,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    MalformedCase { line: usize, reason: String },
    #[error("duplicate case id `{0}`")]
    DuplicateId(String),
    #[error("case `{id}`: invalid gold intent: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGoldIntent { id: String, violations: Vec<IntentViolation> },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn gold_intent(v: &Value, id: &str, skills: &SkillSet) -> Result<ResearchIntent, DatasetError> {
    validate(v, skills).map_err(|violations| DatasetError::InvalidGoldIntent {
        id: id.to_string(),
        violations,
    })
}

fn parse_case(line_no: usize, line: &str, skills: &SkillSet) -> Result<QueryCase, DatasetError> {
    let malformed = |reason: String| DatasetError::MalformedCase { line: line_no, reason };
    let v: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let field = |k: &str| v.get(k).and_then(Value::as_str).ok_or_else(|| malformed(format!("missing string field `{k}`")));
    let id = field("id")?.to_string();
    let tier: Tier = field("tier")?.parse().map_err(malformed)?;
    let query = field("query")?.to_string();
    let gold = v.get("gold").and_then(Value::as_object).ok_or_else(|| malformed("missing object `gold`".into()))?;

    let kinds: Vec<&str> = ["intent", "expect_clarification", "expect_rejection"]
        .into_iter()
        .filter(|k| gold.contains_key(*k))
        .collect();
    let outcome = match kinds.as_slice() {
        ["intent"] => GoldOutcome::Intent(gold_intent(&gold["intent"], &id, skills)?),
        ["expect_clarification"] => {
            let fields = gold["expect_clarification"]
                .as_array()
                .ok_or_else(|| malformed("`expect_clarification` must be a list".into()))?
                .iter()
                .map(|f| f.as_str().unwrap_or_default().parse::<MissingField>().map_err(&malformed))
                .collect::<Result<Vec<_>, _>>()?;
            GoldOutcome::ExpectClarification(fields)
        }
        ["expect_rejection"] => {
            let terms = gold["expect_rejection"]
                .as_array()
                .ok_or_else(|| malformed("`expect_rejection` must be a list".into()))?
                .iter()
                .map(|t| t.as_str().map(str::to_string).ok_or_else(|| malformed("rejection terms must be strings".into())))
                .collect::<Result<Vec<_>, _>>()?;
            if terms.is_empty() {
                return Err(malformed("`expect_rejection` is empty".into()));
            }
            GoldOutcome::ExpectRejection(terms)
        }
        _ => return Err(malformed("gold needs exactly one of intent, expect_clarification, expect_rejection".into())),
    };
    let alternate_intent = match gold.get("alternate_intent") {
        Some(Value::Null) | None => None,
        Some(v) => Some(gold_intent(v, &id, skills)?),
    };
    Ok(QueryCase {
        id,
        tier,
        query,
        gold: Gold { outcome, alternate_intent },
    })
}

/// Parses JSON-lines cases; gold intents are validated against `skills`.
pub fn parse_dataset(text: &str, skills: &SkillSet) -> Result<Vec<QueryCase>, DatasetError> {
    let mut seen = HashSet::new();
    let mut cases = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case = parse_case(k + 1, line, skills)?;
        if !seen.insert(case.id.clone()) {
            return Err(DatasetError::DuplicateId(case.id));
        }
        cases.push(case);
    }
    if cases.is_empty() {
        tracing::warn!("dataset contains no cases");
    }
    Ok(cases)
}

pub fn load_dataset(path: &Path, skills: &SkillSet) -> Result<Vec<QueryCase>, DatasetError> {
    parse_dataset(&std::fs::read_to_string(path)?, skills)
}
