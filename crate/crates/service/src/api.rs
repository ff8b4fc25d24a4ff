//! JSON-over-HTTP surface for elicitation sessions.
//!
//! Reads share a lock; every mutation runs on a copy of the dataset, is
//! persisted, and only then replaces the live state, so a failed request
//! leaves both memory and the store untouched.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;

use reqrec_core::analytics::{satisfaction_report, HUMAN_STUDY_SATISFACTION_PERCENT};
use reqrec_core::datastore::save_state;
use reqrec_core::{Dataset, EducationLevel, Error, RequirementId, Session, SessionId, Stakeholder};

/// Shared service state.
pub struct AppState {
    dataset: RwLock<Dataset>,
    store: Option<PathBuf>,
    clock: fn() -> DateTime<Utc>,
}

impl AppState {
    /// `store` is rewritten after every successful mutation; `None` keeps
    /// the state in memory only.
    pub fn new(dataset: Dataset, store: Option<PathBuf>) -> Self {
        Self {
            dataset: RwLock::new(dataset),
            store,
            clock: Utc::now,
        }
    }

    pub fn with_clock(mut self, clock: fn() -> DateTime<Utc>) -> Self {
        self.clock = clock;
        self
    }

    pub async fn snapshot(&self) -> Dataset {
        self.dataset.read().await.clone()
    }

    /// Writes the current state to the store, if there is one.
    pub async fn persist(&self) -> reqrec_core::Result<()> {
        let guard = self.dataset.read().await;
        match &self.store {
            Some(path) => save_state(path, &guard),
            None => Ok(()),
        }
    }

    async fn mutate<F>(&self, apply: F) -> Result<Session, ApiError>
    where
        F: FnOnce(&mut Dataset, DateTime<Utc>) -> reqrec_core::Result<SessionId>,
    {
        let mut guard = self.dataset.write().await;
        let mut draft = guard.clone();
        let id = apply(&mut draft, (self.clock)())?;
        if let Some(path) = &self.store {
            save_state(path, &draft)?;
        }
        *guard = draft;
        Ok(guard.session(&id)?.clone())
    }
}

/// Error body: `{code, message, details}`.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

/// HTTP status for each domain error code.
pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::Parse { .. } => StatusCode::BAD_REQUEST,
        Error::SessionNotFound(_) => StatusCode::NOT_FOUND,
        Error::WrongState { .. }
        | Error::DuplicateStakeholder(_)
        | Error::StakeholderHasRatings(_)
        | Error::AlreadyRated { .. } => StatusCode::CONFLICT,
        Error::Io(_) | Error::SchemaVersionMismatch { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn details_for(err: &Error) -> Option<Value> {
    match err {
        Error::WrongState { operation, state } => {
            Some(json!({ "operation": operation, "state": state }))
        }
        Error::OutOfScale { score, min, max } => {
            Some(json!({ "score": score, "min": min, "max": max }))
        }
        Error::StarsOutOfRange(stars) => Some(json!({ "stars": stars })),
        Error::CatalogTooSmall { needed, available } => {
            Some(json!({ "needed": needed, "available": available }))
        }
        Error::Parse { line, .. } if *line > 0 => Some(json!({ "line": line })),
        _ => None,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        ApiError {
            status: status_for(&err),
            code: err.code(),
            message: err.to_string(),
            details: details_for(&err),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        Error::Parse {
            line: e.line() as u64,
            message: format!("request body: {e}"),
        }
        .into()
    })
}

#[derive(Deserialize)]
struct CreateSession {
    stakeholder_id: String,
    #[serde(default)]
    education_level: Option<String>,
}

#[derive(Deserialize)]
struct ScoreEntry {
    requirement_id: RequirementId,
    score: i64,
}

#[derive(Deserialize)]
struct RatingsBody {
    ratings: Vec<ScoreEntry>,
}

#[derive(Deserialize)]
struct StarEntry {
    requirement_id: RequirementId,
    stars: i64,
}

#[derive(Deserialize)]
struct FeedbackBody {
    feedback: Vec<StarEntry>,
}

type Shared = State<Arc<AppState>>;

async fn create_session(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let level: EducationLevel = req.education_level.as_deref().unwrap_or("").parse()?;
    if req.stakeholder_id.trim().is_empty() {
        return Err(Error::Invalid("stakeholder_id must not be empty".into()).into());
    }
    let stakeholder = Stakeholder::new(req.stakeholder_id.trim(), level);
    let session = state
        .mutate(|d, now| Ok(d.start_session(stakeholder, now)?.id.clone()))
        .await?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn submit_ratings(
    State(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Session>, ApiError> {
    let req: RatingsBody = parse_body(&body)?;
    let ratings: Vec<_> = req
        .ratings
        .into_iter()
        .map(|r| (r.requirement_id, r.score))
        .collect();
    let id = SessionId::new(id);
    let session = state
        .mutate(|d, now| {
            d.submit_seed_ratings(&id, &ratings, now)?;
            Ok(id.clone())
        })
        .await?;
    Ok(Json(session))
}

async fn request_recommendations(
    State(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Session>, ApiError> {
    if !body.iter().all(u8::is_ascii_whitespace) {
        let _: Value = parse_body(&body)?;
    }
    let id = SessionId::new(id);
    let session = state
        .mutate(|d, now| {
            d.recommend(&id, now)?;
            Ok(id.clone())
        })
        .await?;
    Ok(Json(session))
}

async fn submit_feedback(
    State(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Session>, ApiError> {
    let req: FeedbackBody = parse_body(&body)?;
    let stars: Vec<_> = req
        .feedback
        .into_iter()
        .map(|f| (f.requirement_id, f.stars))
        .collect();
    let id = SessionId::new(id);
    let session = state
        .mutate(|d, now| {
            d.submit_feedback(&id, &stars, now)?;
            Ok(id.clone())
        })
        .await?;
    Ok(Json(session))
}

async fn get_session(
    State(state): Shared,
    Path(id): Path<String>,
) -> Result<Json<Session>, ApiError> {
    let guard = state.dataset.read().await;
    Ok(Json(guard.session(&SessionId::new(id))?.clone()))
}

async fn get_catalog(State(state): Shared) -> Json<Value> {
    let guard = state.dataset.read().await;
    let scale = guard.config.scale;
    Json(json!({
        "requirements": guard.catalog,
        "scale": scale,
        "grid_cells": scale.cells(),
        "config": guard.config,
    }))
}

async fn get_satisfaction(State(state): Shared) -> Json<Value> {
    let guard = state.dataset.read().await;
    let report = satisfaction_report(&guard.feedback());
    Json(json!({
        "report": report,
        "human_study_reference_percent": HUMAN_STUDY_SATISFACTION_PERCENT,
    }))
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found",
        message: "no such endpoint".into(),
        details: None,
    }
}

pub fn app(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/catalog", get(get_catalog))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/ratings", post(submit_ratings))
        .route(
            "/sessions/{id}/recommendations",
            post(request_recommendations),
        )
        .route("/sessions/{id}/feedback", post(submit_feedback))
        .route("/analytics/satisfaction", get(get_satisfaction))
        .fallback(not_found)
        .with_state(state)
}
