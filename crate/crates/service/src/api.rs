//! HTTP routes.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use netsearch_core::io::{export_stats, EdgeStatJson, SessionSpec};
use netsearch_core::session::{BeliefSnapshot, EdgeRef, SearchSession};
use netsearch_core::{Error, Observation};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::store::Store;

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Unprocessable(String),
    Conflict(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoAvailableEdges => ApiError::Conflict(e.to_string()),
            Error::Io(_) => ApiError::Internal(e.to_string()),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(ErrorBody { error: msg })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Unprocessable(format!("invalid request body: {e}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub snapshot: BeliefSnapshot,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRow {
    pub u: String,
    pub v: String,
    pub mean: f64,
    pub var: f64,
    pub score: f64,
    pub available: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecommendationBody {
    pub t: u64,
    pub edge: EdgeRef,
    pub scoreboard: Vec<ScoreRow>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationRequest {
    pub u: String,
    pub v: String,
    pub relevant: bool,
    /// Number of classifications the client believes have been recorded.
    /// A mismatch means the client acted on a stale recommendation.
    #[serde(default)]
    pub t: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AuditRow {
    pub step: u64,
    pub u: String,
    pub v: String,
    pub relevant: bool,
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/recommendation", get(recommendation))
        .route("/sessions/{id}/classifications", post(classify).get(audit))
        .route("/sessions/{id}/beliefs", get(beliefs))
        .route("/sessions/{id}/stats", get(stats))
        .layer(CorsLayer::permissive())
        .with_state(store)
}

fn lookup(store: &Store, id: &str) -> Result<Arc<tokio::sync::RwLock<crate::store::Entry>>, ApiError> {
    store.get(id).ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
}

async fn create_session(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult<CreatedSession> {
    let spec: SessionSpec = parse(&body)?;
    let (session_id, entry) = store.create(spec)?;
    let snapshot = entry.read().await.session.snapshot();
    Ok(Json(CreatedSession { session_id, snapshot }))
}

pub fn recommendation_body(session: &SearchSession) -> Result<RecommendationBody, Error> {
    let rec = session.recommend()?;
    let net = session.network();
    let scoreboard = rec
        .scoreboard
        .edges
        .iter()
        .zip(net.edges())
        .map(|(s, &(u, v))| ScoreRow {
            u: net.label(u).to_string(),
            v: net.label(v).to_string(),
            mean: s.mean,
            var: s.var,
            score: s.score,
            available: s.available,
        })
        .collect();
    Ok(RecommendationBody { t: session.t(), edge: session.edge_ref(rec.edge), scoreboard })
}

async fn recommendation(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<RecommendationBody> {
    let entry = lookup(&store, &id)?;
    let guard = entry.read().await;
    Ok(Json(recommendation_body(&guard.session)?))
}

async fn classify(State(store): State<Arc<Store>>, Path(id): Path<String>, body: Bytes) -> ApiResult<BeliefSnapshot> {
    let entry = lookup(&store, &id)?;
    let req: ClassificationRequest = parse(&body)?;
    let mut guard = entry.write().await;
    if let Some(t) = req.t {
        if t != guard.session.t() {
            return Err(ApiError::Conflict(format!(
                "session is at t={}, request was made at t={t}",
                guard.session.t()
            )));
        }
    }
    let net = guard.session.network();
    let node = |l: &str| net.node_by_label(l).ok_or_else(|| Error::UnknownLabel(l.to_string()));
    let (a, b) = (node(&req.u)?, node(&req.v)?);
    let edge = net
        .find_edge(a, b)
        .ok_or_else(|| Error::UnknownEdge(format!("{}-{}", req.u, req.v)))?;
    guard.record(Observation { edge, relevant: req.relevant })?;
    Ok(Json(guard.session.snapshot()))
}

async fn beliefs(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<BeliefSnapshot> {
    let entry = lookup(&store, &id)?;
    let guard = entry.read().await;
    Ok(Json(guard.session.snapshot()))
}

async fn audit(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Vec<AuditRow>> {
    let entry = lookup(&store, &id)?;
    let guard = entry.read().await;
    let s = &guard.session;
    Ok(Json(
        s.audit()
            .iter()
            .map(|r| {
                let e = s.edge_ref(r.edge);
                AuditRow { step: r.step, u: e.u, v: e.v, relevant: r.relevant }
            })
            .collect(),
    ))
}

async fn stats(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Vec<EdgeStatJson>> {
    let entry = lookup(&store, &id)?;
    let guard = entry.read().await;
    Ok(Json(export_stats(guard.session.network(), guard.session.stats())))
}
