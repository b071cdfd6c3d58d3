//! Typed client for the intent2dag conductor service.

use std::time::{Duration, Instant};

use intent2dag_core::api::{
    ApiError, ApproveBody, CreateSession, EventsPage, Health, MessageBody, RejectBody, SessionListing,
};
use intent2dag_core::conductor::{Session, TimingReport};
use reqwest::RequestBuilder;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Long-poll wait per request in [`Client::wait_settled`].
const POLL_WAIT_MS: u64 = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach {url}: {message}")]
    Unreachable { url: String, message: String },
    #[error("server answered {status}: {error}")]
    Api { status: u16, error: ApiError },
    #[error("unexpected response ({status}): {message}")]
    Decode { status: u16, message: String },
    #[error("session {id} did not settle within {waited:?}")]
    Timeout { id: String, waited: Duration },
}

impl ClientError {
    pub fn api(&self) -> Option<&ApiError> {
        match self {
            ClientError::Api { error, .. } => Some(error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` like `http://127.0.0.1:7878`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn send(&self, req: RequestBuilder, url: &str) -> Result<reqwest::Response, ClientError> {
        let resp = req.send().await.map_err(|e| ClientError::Unreachable {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        Err(match serde_json::from_str::<ApiError>(&text) {
            Ok(error) => ClientError::Api {
                status: status.as_u16(),
                error,
            },
            Err(_) => ClientError::Decode {
                status: status.as_u16(),
                message: text,
            },
        })
    }

    async fn json<T: DeserializeOwned>(&self, req: RequestBuilder, url: &str) -> Result<T, ClientError> {
        let resp = self.send(req, url).await?;
        let status = resp.status();
        resp.json().await.map_err(|e| ClientError::Decode {
            status: status.as_u16(),
            message: e.to_string(),
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let url = self.url(path);
        self.json(self.http.get(&url), &url).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let url = self.url(path);
        self.json(self.http.post(&url).json(body), &url).await
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.get("/health").await
    }

    pub async fn create_session(&self, query: &str) -> Result<Session, ClientError> {
        self.post("/sessions", &CreateSession { query: query.into() }).await
    }

    pub async fn sessions(&self) -> Result<Vec<SessionListing>, ClientError> {
        self.get("/sessions").await
    }

    pub async fn session(&self, id: &str) -> Result<Session, ClientError> {
        self.get(&format!("/sessions/{id}")).await
    }

    pub async fn message(&self, id: &str, text: &str) -> Result<Session, ClientError> {
        self.post(&format!("/sessions/{id}/message"), &MessageBody { text: text.into() }).await
    }

    pub async fn approve_plan(&self, id: &str, body: &ApproveBody) -> Result<Session, ClientError> {
        self.post(&format!("/sessions/{id}/approve-plan"), body).await
    }

    pub async fn approve_execution(&self, id: &str, body: &ApproveBody) -> Result<Session, ClientError> {
        self.post(&format!("/sessions/{id}/approve-execution"), body).await
    }

    pub async fn reject(&self, id: &str, body: &RejectBody) -> Result<Session, ClientError> {
        self.post(&format!("/sessions/{id}/reject"), body).await
    }

    /// Events after `after`, waiting up to `wait_ms` on the server for new ones.
    pub async fn events(&self, id: &str, after: u64, wait_ms: u64) -> Result<EventsPage, ClientError> {
        self.get(&format!("/sessions/{id}/events?after={after}&wait_ms={wait_ms}")).await
    }

    pub async fn timing(&self, id: &str) -> Result<TimingReport, ClientError> {
        self.get(&format!("/sessions/{id}/timing")).await
    }

    /// Serialized DAG bytes exactly as generated.
    pub async fn workflow(&self, id: &str) -> Result<Vec<u8>, ClientError> {
        let url = self.url(&format!("/sessions/{id}/workflow"));
        let resp = self.send(self.http.get(&url), &url).await?;
        let status = resp.status();
        resp.bytes().await.map(|b| b.to_vec()).map_err(|e| ClientError::Decode {
            status: status.as_u16(),
            message: e.to_string(),
        })
    }

    /// Waits until the session needs the user or has terminated.
    pub async fn wait_settled(&self, id: &str, timeout: Duration) -> Result<Session, ClientError> {
        let start = Instant::now();
        let mut after = 0;
        loop {
            let page = self.events(id, after, POLL_WAIT_MS).await?;
            after = page.next;
            if page.phase.awaits_user() || page.phase.is_terminal() {
                return self.session(id).await;
            }
            if start.elapsed() > timeout {
                return Err(ClientError::Timeout {
                    id: id.to_string(),
                    waited: start.elapsed(),
                });
            }
        }
    }
}

/// True for errors caused by the server being unreachable.
pub fn is_unreachable(e: &ClientError) -> bool {
    matches!(e, ClientError::Unreachable { .. })
}

