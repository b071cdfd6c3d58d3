use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ConductorError, Context, Input, Session};
use crate::skills::SkillConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry {
    Open {
        session_id: String,
        query: String,
        domain: Option<String>,
        skill_config: SkillConfig,
        skill_fingerprint: String,
    },
    Input { input: Input },
}

/// One line of a session journal. Only accepted inputs are journaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub entry: Entry,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("cannot read journal: {0}")]
    Io(#[from] std::io::Error),
    #[error("journal line {line} is malformed: {message}")]
    Malformed { line: usize, message: String },
    #[error("journal does not start with an open entry")]
    MissingOpen,
    #[error("journal was written under skill fingerprint {recorded}, current skills are {current}")]
    FingerprintMismatch { recorded: String, current: String },
    #[error("journal entry {seq} was not accepted: {error}")]
    Rejected { seq: u64, error: ConductorError },
}

pub(crate) fn append(path: &Path, entry: &JournalEntry) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(entry).map_err(std::io::Error::other)?;
    line.push(b'\n');
    f.write_all(&line)
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, ReplayError> {
    std::fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ReplayError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Rebuilds a session from its journal without running any effect.
pub(crate) fn replay(entries: &[JournalEntry], ctx: &Context<'_>) -> Result<Session, ReplayError> {
    let (first, rest) = entries.split_first().ok_or(ReplayError::MissingOpen)?;
    let Entry::Open {
        session_id,
        query,
        domain,
        skill_fingerprint,
        ..
    } = &first.entry
    else {
        return Err(ReplayError::MissingOpen);
    };
    if skill_fingerprint != ctx.skills.fingerprint() {
        return Err(ReplayError::FingerprintMismatch {
            recorded: skill_fingerprint.clone(),
            current: ctx.skills.fingerprint().to_string(),
        });
    }
    let (mut session, _) = Session::open(session_id, query, domain.as_deref(), ctx.skills, first.at);
    session.journal.push(first.clone());
    for e in rest {
        match &e.entry {
            Entry::Input { input } => {
                session
                    .apply(ctx, input, e.at)
                    .map_err(|error| ReplayError::Rejected { seq: e.seq, error })?;
            }
            Entry::Open { .. } => return Err(ReplayError::Malformed {
                line: e.seq as usize + 1,
                message: "second open entry".into(),
            }),
        }
        session.journal.push(e.clone());
    }
    Ok(session)
}
