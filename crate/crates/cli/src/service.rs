//! Read-only JSON query service.
//!
//! `GET /health` and `GET /search?q=..&mode=..&n=..&k=..&require=..` only.
//! The engine is loaded before the listener accepts traffic and is shared
//! immutably by every request.

use std::future::Future;
use std::sync::Arc;

use axum::extract::{RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use priorart_core::pipeline::{Engine, PipelineError, SearchMode};
use serde_json::json;
use tokio::net::TcpListener;

use crate::error::CliError;
use crate::response::{run_search, SearchRequest};

pub struct AppState {
    pub engine: Engine,
    pub n_candidates: usize,
    pub k_final: usize,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new().route("/health", get(health)).route("/search", get(search)).fallback(not_found).with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve<F>(listener: TcpListener, state: Arc<AppState>, shutdown: F) -> Result<(), CliError>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| CliError::runtime(format!("server error: {e}")))
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "spans": state.engine.spans().len() }))
}

async fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "not found".into())
}

/// Parses the raw query string; unknown and repeated singular keys are
/// rejected.
pub fn parse_search_params(raw: &str, n_default: usize, k_default: usize) -> Result<SearchRequest, String> {
    let (mut q, mut mode, mut n, mut k, mut timing) = (None, None, None, None, None);
    let mut require = Vec::new();
    for (key, value) in url::form_urlencoded::parse(raw.as_bytes()) {
        let slot = match key.as_ref() {
            "require" => {
                require.push(value.into_owned());
                continue;
            }
            "q" => &mut q,
            "mode" => &mut mode,
            "n" => &mut n,
            "k" => &mut k,
            "timing" => &mut timing,
            other => return Err(format!("unknown parameter `{other}`")),
        };
        if slot.replace(value.into_owned()).is_some() {
            return Err(format!("parameter `{key}` given more than once"));
        }
    }
    let count = |name: &str, v: Option<String>, default: usize| -> Result<usize, String> {
        match v {
            None => Ok(default),
            Some(s) => match s.parse::<usize>() {
                Ok(x) if x > 0 => Ok(x),
                _ => Err(format!("parameter `{name}` must be a positive integer, got `{s}`")),
            },
        }
    };
    Ok(SearchRequest {
        text: q.ok_or("missing required parameter `q`")?,
        mode: match mode {
            None => SearchMode::Rerank,
            Some(m) => m.parse().map_err(|e: PipelineError| e.to_string())?,
        },
        n_candidates: count("n", n, n_default)?,
        k_final: count("k", k, k_default)?,
        require,
        timing: match timing.as_deref() {
            None | Some("0") | Some("false") => false,
            Some("1") | Some("true") => true,
            Some(other) => return Err(format!("parameter `timing` must be 0 or 1, got `{other}`")),
        },
    })
}

async fn search(State(state): State<Arc<AppState>>, RawQuery(raw): RawQuery) -> Result<Response, ApiError> {
    let req =
        parse_search_params(raw.as_deref().unwrap_or(""), state.n_candidates, state.k_final).map_err(bad_request)?;
    let outcome = tokio::task::spawn_blocking(move || run_search(&state.engine, &req))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match outcome {
        Ok(resp) => Ok(([(header::CONTENT_TYPE, "application/json")], resp.to_json()).into_response()),
        Err(e) => match CliError::from(e) {
            CliError::Usage(m) => Err(bad_request(m)),
            CliError::Runtime(m) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, m)),
        },
    }
}
