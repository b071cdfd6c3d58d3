use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use intent2dag_core::assets;
use intent2dag_core::extraction::{extract_llm, request_body, ExtractionError, LlmBackend, LlmBackendConfig, Outcome};
use intent2dag_core::skills::{select_skillset, SkillConfig, SkillSet};
use serde_json::{json, Value};

const INTENT: &str = r#"{"analysis_type":"multi_population","populations":["GBR","FIN"],"chromosomes":null,"regions":[{"name":"BRCA1","chromosome":"17","start":41196312,"end":41277500}],"focus":"all_variants"}"#;

fn completion() -> Value {
    json!({
        "choices": [{"message": {"role": "assistant", "content": INTENT}}],
        "usage": {"prompt_tokens": 1200, "completion_tokens": 80},
    })
}

fn s3() -> SkillSet {
    select_skillset(SkillConfig::S3, &assets::skill_library()).unwrap()
}

async fn ok(State(hits): State<Arc<AtomicUsize>>) -> Json<Value> {
    hits.fetch_add(1, Ordering::SeqCst);
    Json(completion())
}

async fn denied() -> StatusCode {
    StatusCode::UNAUTHORIZED
}

async fn flaky(State(hits): State<Arc<AtomicUsize>>) -> Result<Json<Value>, StatusCode> {
    if hits.fetch_add(1, Ordering::SeqCst) == 0 {
        Err(StatusCode::SERVICE_UNAVAILABLE)
    } else {
        Ok(Json(completion()))
    }
}

async fn mock() -> (String, Arc<AtomicUsize>) {
    let hits = Arc::new(AtomicUsize::new(0));
    let app = Router::new()
        .route("/ok", post(ok))
        .route("/denied", post(denied))
        .route("/flaky", post(flaky))
        .with_state(hits.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), hits)
}

fn backend(url: String) -> LlmBackend {
    LlmBackend::http(LlmBackendConfig {
        endpoint_url: url,
        api_key_env: "I2D_TEST_UNSET_KEY".into(),
        backoff_ms: 1,
        ..Default::default()
    })
    .unwrap()
}

#[tokio::test]
async fn completion_is_parsed_and_costed() {
    let (base, hits) = mock().await;
    let r = extract_llm("Analyze BRCA1 in British and Finnish people", &s3(), &backend(format!("{base}/ok")))
        .await
        .unwrap();
    let Outcome::Intent(i) = r.outcome else { panic!("{:?}", r.outcome) };
    assert_eq!(i.populations, ["FIN", "GBR"]);
    let cost = r.token_cost.unwrap();
    assert_eq!((cost.prompt_tokens, cost.completion_tokens), (1200, 80));
    assert!(r.extractor_id.starts_with("llm:"));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn unauthorized_is_not_retried() {
    let (base, _) = mock().await;
    let err = extract_llm("Analyze BRCA1 in EUR", &s3(), &backend(format!("{base}/denied"))).await.unwrap_err();
    assert!(matches!(err, ExtractionError::AuthFailure { status: 401 }), "{err:?}");
}

#[tokio::test]
async fn server_error_is_retried() {
    let (base, hits) = mock().await;
    let r = extract_llm("Analyze BRCA1 in EUR", &s3(), &backend(format!("{base}/flaky"))).await.unwrap();
    assert!(matches!(r.outcome, Outcome::Intent(_)));
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn recorded_backend_replays_by_request_hash() {
    let dir = tempfile::tempdir().unwrap();
    let skills = s3();
    let recorded = LlmBackend::recorded(dir.path(), LlmBackendConfig::default());
    let query = "Analyze BRCA1 in British and Finnish people";

    let missing = extract_llm(query, &skills, &recorded).await.unwrap_err();
    assert!(matches!(missing, ExtractionError::RecordingNotFound { .. }), "{missing:?}");

    let LlmBackend::Recorded(r) = &recorded else { unreachable!() };
    let body = request_body(query, &skills, recorded.model());
    std::fs::write(r.path_for(&body), completion().to_string()).unwrap();
    let result = extract_llm(query, &skills, &recorded).await.unwrap();
    assert!(matches!(result.outcome, Outcome::Intent(_)));
}
