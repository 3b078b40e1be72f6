//! HTTP scoring service over a pair of triage model artifacts.
//!
//! Endpoints: `GET /healthz`, `POST /v1/predict`, `POST /v1/whatif`,
//! `GET /v1/model/meta`. Bodies are JSON. Requests read one immutable
//! snapshot; [`AppState::swap`] replaces it between requests.

mod model;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use model::{
    ApiError, AttributionEntry, MetaResponse, ModelInfo, PredictResponse, Snapshot,
    API_SCHEMA_VERSION, CLASSIFIER_FILE, DAYS_FILE, MAX_OVERRIDES, TOP_ATTRIBUTIONS,
    TOP_IMPORTANCE,
};

#[derive(Clone, Default)]
pub struct AppState {
    current: Arc<RwLock<Option<Arc<Snapshot>>>>,
}

impl AppState {
    pub fn new(snapshot: Option<Snapshot>) -> Self {
        Self {
            current: Arc::new(RwLock::new(snapshot.map(Arc::new))),
        }
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.current.read().expect("snapshot lock poisoned").clone()
    }

    /// Replaces the served models; in-flight requests finish on the old ones.
    pub fn swap(&self, snapshot: Option<Snapshot>) {
        *self.current.write().expect("snapshot lock poisoned") = snapshot.map(Arc::new);
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn not_loaded() -> ApiError {
    ApiError {
        status: 503,
        error: "no model loaded".into(),
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    #[serde(default)]
    pub features: Map<String, Value>,
    #[serde(default = "yes")]
    pub calibrated: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub base: PredictRequest,
    #[serde(default)]
    pub overrides: Vec<Map<String, Value>>,
}

/// One what-if element: a prediction or the reason there is none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WhatIfItem {
    Ok {
        index: usize,
        prediction: PredictResponse,
    },
    Err {
        index: usize,
        error: String,
        status: u16,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub results: Vec<WhatIfItem>,
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn healthz(State(state): State<AppState>) -> Response {
    match state.snapshot() {
        Some(_) => (StatusCode::OK, Json(serde_json::json!({ "status": "ok" }))).into_response(),
        None => not_loaded().into_response(),
    }
}

pub fn predict_one(snapshot: &Snapshot, req: &PredictRequest) -> Result<PredictResponse, ApiError> {
    let row = snapshot.parse_features(&req.features)?;
    snapshot.predict(&row, req.calibrated)
}

async fn predict(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<PredictResponse>, ApiError> {
    let snapshot = state.snapshot().ok_or_else(not_loaded)?;
    let req: PredictRequest = parse_body(&body)?;
    Ok(Json(predict_one(&snapshot, &req)?))
}

/// Element 0 is the base; element i + 1 applies `overrides[i]` on top of it.
pub fn what_if(snapshot: &Snapshot, req: &WhatIfRequest) -> Result<WhatIfResponse, ApiError> {
    if req.overrides.len() > MAX_OVERRIDES {
        return Err(ApiError::bad_request(format!(
            "{} overrides given, at most {MAX_OVERRIDES} allowed",
            req.overrides.len()
        )));
    }
    let base = snapshot.parse_features(&req.base.features);
    let item = |index: usize, outcome: Result<PredictResponse, ApiError>| match outcome {
        Ok(prediction) => WhatIfItem::Ok { index, prediction },
        Err(e) => WhatIfItem::Err {
            index,
            error: e.error,
            status: e.status,
        },
    };
    let mut results = Vec::with_capacity(req.overrides.len() + 1);
    results.push(item(
        0,
        base.clone()
            .and_then(|row| snapshot.predict(&row, req.base.calibrated)),
    ));
    for (i, o) in req.overrides.iter().enumerate() {
        let outcome = base.clone().and_then(|mut row| {
            snapshot.apply_overrides(&mut row, o)?;
            snapshot.predict(&row, req.base.calibrated)
        });
        results.push(item(i + 1, outcome));
    }
    Ok(WhatIfResponse { results })
}

async fn whatif(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<WhatIfResponse>, ApiError> {
    let snapshot = state.snapshot().ok_or_else(not_loaded)?;
    let req: WhatIfRequest = parse_body(&body)?;
    Ok(Json(what_if(&snapshot, &req)?))
}

async fn meta(State(state): State<AppState>) -> Result<Json<MetaResponse>, ApiError> {
    let snapshot = state.snapshot().ok_or_else(not_loaded)?;
    Ok(Json(snapshot.meta()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/predict", post(predict))
        .route("/v1/whatif", post(whatif))
        .route("/v1/model/meta", get(meta))
        .with_state(state)
}

/// Serves the artifacts in `artifact_dir` until the process is stopped.
pub async fn run(addr: SocketAddr, artifact_dir: &Path) -> std::io::Result<()> {
    let snapshot =
        Snapshot::load_dir(artifact_dir).map_err(|e| std::io::Error::other(e.to_string()))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(
        "serving {} on {}",
        artifact_dir.display(),
        listener.local_addr()?
    );
    axum::serve(listener, router(AppState::new(Some(snapshot)))).await
}
