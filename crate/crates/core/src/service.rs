//! HTTP front end over a [`Snapshot`].
//!
//! Requests read the current snapshot through an `Arc`; `/reload` builds a
//! new one and swaps the pointer, so in-flight queries finish on the old one.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::RecordId;
use crate::engine::{Query, QueryError, QueryResponse, RecordView, Snapshot};
use crate::metrics::{export_plot_data, make_series, PlotDocument};

type Loader = Box<dyn Fn() -> Result<Snapshot, QueryError> + Send + Sync>;

pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    loader: Option<Loader>,
    plots: Mutex<HashMap<String, PlotDocument>>,
}

impl AppState {
    pub fn new(snapshot: Snapshot) -> Self {
        Self {
            snapshot: RwLock::new(Arc::new(snapshot)),
            loader: None,
            plots: Mutex::new(HashMap::new()),
        }
    }

    /// `loader` runs on every `/reload` request.
    pub fn with_loader(mut self, loader: impl Fn() -> Result<Snapshot, QueryError> + Send + Sync + 'static) -> Self {
        self.loader = Some(Box::new(loader));
        self
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().clone()
    }

    pub fn replace(&self, snapshot: Snapshot) {
        *self.snapshot.write() = Arc::new(snapshot);
        self.plots.lock().clear();
    }
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let (status, code) = match &e {
            QueryError::EmptyText => (StatusCode::BAD_REQUEST, "EmptyText"),
            QueryError::InvalidQuery(_) => (StatusCode::BAD_REQUEST, "InvalidQuery"),
            QueryError::UnknownPrompt(_) => (StatusCode::BAD_REQUEST, "UnknownPrompt"),
            QueryError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound"),
            QueryError::EmptyCorpus => (StatusCode::UNPROCESSABLE_ENTITY, "EmptyCorpus"),
            QueryError::ProviderUnavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, "ProviderUnavailable"),
            QueryError::FingerprintMismatch { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "FingerprintMismatch"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "message": self.message}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Serialize)]
struct QueryReply {
    #[serde(flatten)]
    response: QueryResponse,
    plot_id: String,
}

/// Stable id for a query: hex SHA-256 of its JSON form.
pub fn query_hash(q: &Query) -> String {
    let bytes = serde_json::to_vec(q).expect("query serialises");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_id(raw: &str) -> ApiResult<RecordId> {
    RecordId::new(raw).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidRecordId", e.to_string()))
}

async fn query(State(state): State<Arc<AppState>>, body: Result<Json<Query>, JsonRejection>) -> ApiResult<Json<QueryReply>> {
    let Json(q) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", e.body_text()))?;
    let snap = state.snapshot();
    // the provider may block on a remote call
    let (q, resp) = tokio::task::spawn_blocking(move || {
        let r = snap.query(&q).map(|resp| (resp, snap.settings().thresholds));
        (q, r)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?;
    let (response, thresholds) = resp?;
    let plot_id = query_hash(&q);
    let series = make_series(q.text.clone(), &response.curve).expect("curve is a valid series");
    let plot = export_plot_data(&series, &response.metrics, &thresholds);
    state.plots.lock().insert(plot_id.clone(), plot);
    Ok(Json(QueryReply { response, plot_id }))
}

async fn record(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<RecordView>> {
    let id = parse_id(&id)?;
    Ok(Json(state.snapshot().get_record(&id)?))
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

async fn frame(State(state): State<Arc<AppState>>, Path((id, index)): Path<(String, u32)>) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    let path = state.snapshot().frame_path(&id, index).map_err(|e| match e {
        QueryError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("record {id} has no frame {index}")),
        other => other.into(),
    })?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn plot(State(state): State<Arc<AppState>>, Path(hash): Path<String>) -> ApiResult<Json<PlotDocument>> {
    state
        .plots
        .lock()
        .get(&hash)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("no plot {hash}")))
}

async fn reload(State(state): State<Arc<AppState>>) -> ApiResult<Json<serde_json::Value>> {
    let st = state.clone();
    let fresh = tokio::task::spawn_blocking(move || st.loader.as_ref().map(|load| load()))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?;
    let snap = match fresh {
        None => return Err(ApiError::new(StatusCode::CONFLICT, "ReloadUnsupported", "service has no index source to reload from")),
        Some(r) => r?,
    };
    let records = snap.catalog().len();
    state.replace(snap);
    log::info!("reloaded snapshot with {records} records");
    Ok(Json(json!({"status": "reloaded", "records": records})))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({"status": "ok", "records": state.snapshot().catalog().len()}))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/query", post(query))
        .route("/api/v1/records/{id}", get(record))
        .route("/api/v1/records/{id}/frames/{index}", get(frame))
        .route("/api/v1/plots/{hash}", get(plot))
        .route("/api/v1/reload", post(reload))
        .route("/api/v1/health", get(health))
        .with_state(state)
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
