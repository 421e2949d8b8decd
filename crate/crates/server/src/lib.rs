//! JSON-over-HTTP bridge for live campaigns.
//!
//! | method | path           | body / query         | notes                              |
//! |--------|----------------|----------------------|------------------------------------|
//! | GET    | `/api/status`  |                      | 503 until the initial design is in |
//! | GET    | `/api/pairs`   | `?limit=k`           | oldest pending pairs first         |
//! | POST   | `/api/labels`  | `{pair_id, label}`   | 400 / 404 / 409 on bad input       |
//! | GET    | `/api/trace`   |                      | trace records so far               |
//!
//! Handlers only read snapshots or enqueue labels, so none of them waits on
//! model training.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use hitlbo::engine::{LabelOutcome, PendingPair};
use hitlbo::CampaignHandle;

/// Body of a successful `POST /api/labels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAck {
    pub accepted: bool,
    pub pair_id: String,
    /// Posterior version at the time of the request. The label is folded in
    /// by the feedback loop's next cycle, which bumps this.
    pub posterior_version: u64,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

pub fn router(handle: Arc<CampaignHandle>) -> Router {
    Router::new()
        .route("/api/status", get(status))
        .route("/api/pairs", get(pairs))
        .route("/api/labels", post(labels))
        .route("/api/trace", get(trace))
        .layer(CorsLayer::permissive())
        .with_state(handle)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    handle: Arc<CampaignHandle>,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(handle))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn status(State(h): State<Arc<CampaignHandle>>) -> Response {
    match h.status() {
        Some(s) => Json(s).into_response(),
        None => error(StatusCode::SERVICE_UNAVAILABLE, "campaign has not started"),
    }
}

fn parse_limit(query: Option<&str>, default: usize) -> Result<usize, String> {
    let mut limit = default;
    for part in query.unwrap_or("").split('&').filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').unwrap_or((part, ""));
        if key == "limit" {
            limit = value
                .parse()
                .map_err(|_| format!("limit must be a non-negative integer, got `{value}`"))?;
        }
    }
    Ok(limit)
}

async fn pairs(State(h): State<Arc<CampaignHandle>>, RawQuery(query): RawQuery) -> Response {
    let limit = match parse_limit(query.as_deref(), h.config.pairs_per_event) {
        Ok(l) => l,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let pending: Vec<PendingPair> = h.live.as_ref().map(|b| b.pending(limit)).unwrap_or_default();
    Json(pending).into_response()
}

async fn labels(State(h): State<Arc<CampaignHandle>>, body: Bytes) -> Response {
    let Ok(Value::Object(doc)) = serde_json::from_slice::<Value>(&body) else {
        return error(StatusCode::BAD_REQUEST, "body must be a JSON object");
    };
    let Some(pair_id) = doc.get("pair_id").and_then(Value::as_str) else {
        return error(StatusCode::BAD_REQUEST, "pair_id must be a string");
    };
    let label = match doc.get("label").and_then(Value::as_u64) {
        Some(l @ (0 | 1)) => l as u8,
        _ => return error(StatusCode::BAD_REQUEST, "label must be 0 or 1"),
    };
    let Some(bridge) = h.live.as_ref() else {
        return error(StatusCode::NOT_FOUND, format!("no pending pair `{pair_id}`"));
    };
    match bridge.submit(pair_id, label, h.iteration()) {
        LabelOutcome::Accepted => Json(LabelAck {
            accepted: true,
            pair_id: pair_id.to_string(),
            posterior_version: h.preferences.version(),
        })
        .into_response(),
        LabelOutcome::UnknownPair => error(StatusCode::NOT_FOUND, format!("no pending pair `{pair_id}`")),
        LabelOutcome::AlreadyLabeled => error(StatusCode::CONFLICT, format!("`{pair_id}` is already labeled")),
        LabelOutcome::InvalidLabel => error(StatusCode::BAD_REQUEST, "label must be 0 or 1"),
    }
}

async fn trace(State(h): State<Arc<CampaignHandle>>) -> Response {
    Json(h.trace()).into_response()
}
