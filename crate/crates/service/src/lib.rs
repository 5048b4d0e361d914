//! HTTP service for reviewing ranked hypernym candidates and committing
//! accepted ones into a working taxonomy.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/words/next` | next pending word and the queue length |
//! | GET | `/candidates?word=W&k=10` | ranked candidates for `W` |
//! | POST | `/decision` | record accept/reject for one candidate |
//! | POST | `/commit` | attach a word under its accepted candidates |
//! | GET | `/taxonomy/export` | working taxonomy as JSON Lines |

pub mod session;

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

pub use session::{CandidateView, Decision, Engine, Event, Seed, ServiceError, Session, Verdict};

pub type Shared = Arc<RwLock<Session>>;

pub const DEFAULT_K: usize = 10;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::EmptyQueue | ServiceError::UnknownSynset(_) | ServiceError::UnknownWord(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::BadK => StatusCode::BAD_REQUEST,
            ServiceError::Oov(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::AlreadyCommitted(_) | ServiceError::NotPending(_) | ServiceError::NoAccepts(_) => {
                StatusCode::CONFLICT
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{self}");
        }
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct NextWord {
    pub word: String,
    pub remaining_count: usize,
}

#[derive(Debug, Deserialize)]
pub struct CandidatesQuery {
    pub word: Option<String>,
    pub k: Option<usize>,
}

#[derive(Debug, Deserialize)]
pub struct DecisionRequest {
    pub word: String,
    pub synset_id: String,
    pub verdict: Verdict,
    pub annotator: String,
}

#[derive(Debug, Deserialize)]
pub struct CommitRequest {
    pub word: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CommitResponse {
    pub new_synset_id: String,
}

fn read(state: &Shared) -> std::sync::RwLockReadGuard<'_, Session> {
    state.read().unwrap_or_else(|e| e.into_inner())
}

fn write(state: &Shared) -> std::sync::RwLockWriteGuard<'_, Session> {
    state.write().unwrap_or_else(|e| e.into_inner())
}

async fn next_word(State(state): State<Shared>) -> Result<Json<NextWord>, ServiceError> {
    let (word, remaining_count) = read(&state).next_word()?;
    Ok(Json(NextWord { word, remaining_count }))
}

async fn candidates(State(state): State<Shared>, Query(q): Query<CandidatesQuery>) -> Response {
    let Some(word) = q.word.filter(|w| !w.trim().is_empty()) else {
        let body = ErrorBody {
            error: "missing query parameter: word".into(),
        };
        return (StatusCode::BAD_REQUEST, Json(body)).into_response();
    };
    match read(&state).candidates(&word, q.k.unwrap_or(DEFAULT_K)) {
        Ok(c) => Json(c).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn decision(State(state): State<Shared>, Json(req): Json<DecisionRequest>) -> Result<StatusCode, ServiceError> {
    write(&state).decide(Decision {
        word: req.word,
        synset_id: req.synset_id,
        verdict: req.verdict,
        annotator: req.annotator,
        timestamp: 0,
    })?;
    Ok(StatusCode::NO_CONTENT)
}

async fn commit(State(state): State<Shared>, Json(req): Json<CommitRequest>) -> Result<Json<CommitResponse>, ServiceError> {
    let new_synset_id = write(&state).commit(&req.word)?;
    Ok(Json(CommitResponse { new_synset_id }))
}

async fn export(State(state): State<Shared>) -> impl IntoResponse {
    let body = read(&state).export();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body)
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/words/next", get(next_word))
        .route("/candidates", get(candidates))
        .route("/decision", post(decision))
        .route("/commit", post(commit))
        .route("/taxonomy/export", get(export))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serve until ctrl-c.
pub async fn serve(state: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
