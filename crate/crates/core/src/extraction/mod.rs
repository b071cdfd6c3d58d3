//! Query text to `ResearchIntent`, clarification request, or rejection.

mod llm;
mod prompt;
mod response;
mod rule;

use serde::{Deserialize, Serialize};

use crate::intent::{IntentViolation, ResearchIntent};
use crate::skills::SkillSet;

pub use llm::{extract_llm, request_body, LlmBackend, LlmBackendConfig, RecordedBackend};
pub use prompt::{build_preamble, build_prompt};
pub use response::parse_llm_response;
pub use rule::extract_rule;

/// Separates the original query from appended corrections in a merged
/// conversation context. Statements after a separator override earlier ones.
pub const CORRECTION_SEPARATOR: &str = "\n--- correction ---\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingField {
    Populations,
    ChromosomesOrRegions,
    AnalysisType,
}

impl MissingField {
    pub fn as_str(self) -> &'static str {
        match self {
            MissingField::Populations => "populations",
            MissingField::ChromosomesOrRegions => "chromosomes_or_regions",
            MissingField::AnalysisType => "analysis_type",
        }
    }
}

impl std::str::FromStr for MissingField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "populations" => Ok(MissingField::Populations),
            "chromosomes_or_regions" | "chromosomes" | "regions" => Ok(MissingField::ChromosomesOrRegions),
            "analysis_type" => Ok(MissingField::AnalysisType),
            other => Err(format!("unknown field `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationRequest {
    pub missing_fields: Vec<MissingField>,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionNotice {
    pub unresolved_terms: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Intent(ResearchIntent),
    Clarification(ClarificationRequest),
    Rejection(RejectionNotice),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenCost {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub usd_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub outcome: Outcome,
    pub skill_fingerprint: String,
    /// `rule` or `llm:<model>`.
    pub extractor_id: String,
    pub elapsed_ms: u64,
    pub token_cost: Option<TokenCost>,
}

impl ExtractionResult {
    pub fn intent(&self) -> Option<&ResearchIntent> {
        match &self.outcome {
            Outcome::Intent(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ExtractionError {
    #[error("LLM backend unavailable: {message}")]
    BackendUnavailable { message: String },
    #[error("LLM request timed out after {timeout_ms} ms")]
    Timeout { timeout_ms: u64 },
    #[error("LLM backend rejected the credentials (HTTP {status})")]
    AuthFailure { status: u16 },
    #[error("LLM response contains no JSON object: {excerpt}")]
    UnparseableResponse { excerpt: String },
    #[error("LLM response violates the intent schema: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    SchemaViolation { violations: Vec<IntentViolation> },
    #[error("no recorded response for request {request_hash}")]
    RecordingNotFound { request_hash: String },
    #[error("LLM backend is not configured: {message}")]
    NotConfigured { message: String },
}

/// The extractor a session or evaluation uses.
#[derive(Debug, Clone)]
pub enum Extractor {
    Rule,
    Llm(LlmBackend),
}

impl Extractor {
    pub fn id(&self) -> String {
        match self {
            Extractor::Rule => "rule".into(),
            Extractor::Llm(b) => format!("llm:{}", b.model()),
        }
    }

    pub async fn extract(
        &self,
        query: &str,
        skills: &SkillSet,
    ) -> Result<ExtractionResult, ExtractionError> {
        match self {
            Extractor::Rule => Ok(extract_rule(query, skills)),
            Extractor::Llm(backend) => extract_llm(query, skills, backend).await,
        }
    }

    /// Runs [`Extractor::extract`] to completion on the calling thread.
    /// Must not be called from inside an async runtime.
    pub fn extract_blocking(
        &self,
        query: &str,
        skills: &SkillSet,
    ) -> Result<ExtractionResult, ExtractionError> {
        match self {
            Extractor::Rule => Ok(extract_rule(query, skills)),
            Extractor::Llm(_) => tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .map_err(|e| ExtractionError::BackendUnavailable {
                    message: e.to_string(),
                })?
                .block_on(self.extract(query, skills)),
        }
    }
}
