//! Chat-completion client and recorded-response backend.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{parse_llm_response, prompt::build_prompt, ExtractionError, ExtractionResult, TokenCost};
use crate::skills::SkillSet;

pub const ENV_ENDPOINT: &str = "I2D_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "I2D_LLM_MODEL";
pub const ENV_API_KEY: &str = "I2D_LLM_API_KEY";

const SYSTEM_MESSAGE: &str = "You convert research questions into JSON. Output JSON only.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmBackendConfig {
    pub endpoint_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    /// USD per million prompt tokens.
    pub prompt_price_per_mtok: f64,
    /// USD per million completion tokens.
    pub completion_price_per_mtok: f64,
}

impl Default for LlmBackendConfig {
    fn default() -> Self {
        LlmBackendConfig {
            endpoint_url: String::new(),
            model: "gpt-4.1-nano".into(),
            api_key_env: ENV_API_KEY.into(),
            timeout_ms: 30_000,
            max_retries: 2,
            backoff_ms: 250,
            prompt_price_per_mtok: 0.10,
            completion_price_per_mtok: 0.40,
        }
    }
}

impl LlmBackendConfig {
    /// Overlays `I2D_LLM_ENDPOINT` and `I2D_LLM_MODEL` when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            self.endpoint_url = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            self.model = v;
        }
        self
    }

    /// Plain `http` is accepted only for loopback hosts.
    pub fn check_endpoint(&self) -> Result<(), ExtractionError> {
        let url = reqwest::Url::parse(&self.endpoint_url).map_err(|e| ExtractionError::NotConfigured {
            message: format!("invalid endpoint `{}`: {e}", self.endpoint_url),
        })?;
        let host = url.host_str().unwrap_or_default().trim_matches(|c| c == '[' || c == ']');
        let loopback = host == "localhost"
            || host.parse::<std::net::IpAddr>().is_ok_and(|ip| ip.is_loopback());
        match url.scheme() {
            "https" => Ok(()),
            "http" if loopback => Ok(()),
            other => Err(ExtractionError::NotConfigured {
                message: format!("endpoint scheme `{other}` requires https for non-loopback hosts"),
            }),
        }
    }

    fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> TokenCost {
        TokenCost {
            prompt_tokens,
            completion_tokens,
            usd_estimate: (prompt_tokens as f64 * self.prompt_price_per_mtok
                + completion_tokens as f64 * self.completion_price_per_mtok)
                / 1e6,
        }
    }
}

/// Replays stored chat-completion responses keyed by the SHA-256 of the request body.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedBackend {
    pub dir: PathBuf,
    pub config: LlmBackendConfig,
}

impl RecordedBackend {
    pub fn path_for(&self, body: &Value) -> PathBuf {
        self.dir.join(format!("{}.json", request_hash(body)))
    }
}

#[derive(Debug, Clone)]
pub enum LlmBackend {
    Http {
        config: LlmBackendConfig,
        client: reqwest::Client,
    },
    Recorded(RecordedBackend),
}

impl LlmBackend {
    pub fn http(config: LlmBackendConfig) -> Result<Self, ExtractionError> {
        config.check_endpoint()?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ExtractionError::BackendUnavailable { message: e.to_string() })?;
        Ok(LlmBackend::Http { config, client })
    }

    pub fn recorded(dir: impl Into<PathBuf>, config: LlmBackendConfig) -> Self {
        LlmBackend::Recorded(RecordedBackend { dir: dir.into(), config })
    }

    pub fn config(&self) -> &LlmBackendConfig {
        match self {
            LlmBackend::Http { config, .. } => config,
            LlmBackend::Recorded(r) => &r.config,
        }
    }

    pub fn model(&self) -> &str {
        &self.config().model
    }
}

/// The chat-completion request body for `query`.
pub fn request_body(query: &str, skills: &SkillSet, model: &str) -> Value {
    json!({
        "model": model,
        "temperature": 0,
        "messages": [
            {"role": "system", "content": SYSTEM_MESSAGE},
            {"role": "user", "content": build_prompt(query, skills)},
        ],
    })
}

fn request_hash(body: &Value) -> String {
    hex::encode(Sha256::digest(body.to_string().as_bytes()))
}

async fn post(config: &LlmBackendConfig, client: &reqwest::Client, body: &Value) -> Result<Value, ExtractionError> {
    let key = std::env::var(&config.api_key_env).unwrap_or_default();
    let mut attempt = 0;
    loop {
        let result = client
            .post(&config.endpoint_url)
            .bearer_auth(&key)
            .json(body)
            .send()
            .await;
        let retryable = match result {
            Ok(resp) => {
                let status = resp.status();
                if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
                    return Err(ExtractionError::AuthFailure { status: status.as_u16() });
                }
                if status.is_success() {
                    return resp.json::<Value>().await.map_err(|e| ExtractionError::UnparseableResponse {
                        excerpt: e.to_string(),
                    });
                }
                if !status.is_server_error() && status != reqwest::StatusCode::TOO_MANY_REQUESTS {
                    return Err(ExtractionError::BackendUnavailable {
                        message: format!("HTTP {status}"),
                    });
                }
                ExtractionError::BackendUnavailable {
                    message: format!("HTTP {status}"),
                }
            }
            Err(e) if e.is_timeout() => ExtractionError::Timeout {
                timeout_ms: config.timeout_ms,
            },
            Err(e) => ExtractionError::BackendUnavailable { message: e.to_string() },
        };
        if attempt >= config.max_retries {
            return Err(retryable);
        }
        tracing::warn!(attempt, error = %retryable, "retrying LLM request");
        tokio::time::sleep(Duration::from_millis(config.backoff_ms << attempt)).await;
        attempt += 1;
    }
}

fn completion_text(resp: &Value) -> Result<&str, ExtractionError> {
    resp.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ExtractionError::UnparseableResponse {
            excerpt: resp.to_string().chars().take(120).collect(),
        })
}

/// Extracts via the configured backend; the response is validated like any other.
pub async fn extract_llm(
    query: &str,
    skills: &SkillSet,
    backend: &LlmBackend,
) -> Result<ExtractionResult, ExtractionError> {
    let started = Instant::now();
    let config = backend.config();
    let body = request_body(query, skills, &config.model);
    let response = match backend {
        LlmBackend::Http { config, client } => post(config, client, &body).await?,
        LlmBackend::Recorded(r) => {
            let path = r.path_for(&body);
            let text = std::fs::read_to_string(&path).map_err(|_| ExtractionError::RecordingNotFound {
                request_hash: request_hash(&body),
            })?;
            serde_json::from_str(&text).map_err(|e| ExtractionError::UnparseableResponse {
                excerpt: e.to_string(),
            })?
        }
    };
    let mut result = parse_llm_response(completion_text(&response)?, skills)?;
    let usage = |k: &str| response.pointer(&format!("/usage/{k}")).and_then(Value::as_u64);
    if let (Some(p), Some(c)) = (usage("prompt_tokens"), usage("completion_tokens")) {
        result.token_cost = Some(config.cost(p, c));
    }
    result.extractor_id = format!("llm:{}", config.model);
    result.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(result)
}
