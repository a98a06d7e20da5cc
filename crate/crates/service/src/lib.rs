//! HTTP service over the flightstat library: predictions from the loaded
//! models, dialog sessions, the user's flight list and prediction analytics.

mod error;
mod registry;
mod sessions;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use flightstat::dialog::{DialogContext, DialogSession, FlightRequest};
use flightstat::predictor::{ModelKind, Prediction};
use flightstat::request::{resolve_request, PredictRequest};
use flightstat::store::{EventWindow, NewFlight, PredictionEvent, Store};
use flightstat::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

pub use error::ApiError;
pub use registry::ModelRegistry;
pub use sessions::{Checkout, SessionManager, SESSION_TTL};

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub default_model: ModelKind,
}

impl ServiceConfig {
    /// Reads `FLIGHTSTAT_DATA_DIR`, `FLIGHTSTAT_PORT` and
    /// `FLIGHTSTAT_DEFAULT_MODEL`.
    pub fn from_env() -> Result<Self> {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.trim().is_empty());
        let port = match var("FLIGHTSTAT_PORT") {
            Some(p) => p.trim().parse().map_err(|_| {
                Error::Argument(format!("FLIGHTSTAT_PORT {p:?} is not a port number"))
            })?,
            None => DEFAULT_PORT,
        };
        let default_model = match var("FLIGHTSTAT_DEFAULT_MODEL") {
            Some(m) => m.parse()?,
            None => ModelKind::Mlp,
        };
        Ok(ServiceConfig {
            data_dir: var("FLIGHTSTAT_DATA_DIR")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("data")),
            port,
            default_model,
        })
    }
}

pub struct AppState {
    pub registry: ModelRegistry,
    pub store: Store,
    pub sessions: SessionManager,
    pub default_model: ModelKind,
}

impl AppState {
    /// Opens the store under `data_dir` and loads its `models` directory.
    pub fn open(data_dir: impl Into<PathBuf>, default_model: ModelKind) -> Result<Self> {
        let store = Store::open(data_dir)?;
        let registry = ModelRegistry::load(&store.models_dir())?;
        Ok(AppState {
            registry,
            store,
            sessions: SessionManager::new(SESSION_TTL),
            default_model,
        })
    }
}

type Shared = Arc<AppState>;
type ApiResult<T> = std::result::Result<T, ApiError>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/predict", post(predict))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/utterance", post(post_utterance))
        .route("/flights", get(list_flights).post(add_flight))
        .route("/flights/{id}", delete(remove_flight).get(get_flight))
        .route("/analytics/summary", get(summary))
        .route("/health", get(health))
        .with_state(state)
}

/// Binds `addr` and serves until the process is interrupted.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, state).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

#[derive(Debug, Serialize)]
struct PredictionBody {
    model: &'static str,
    label: &'static str,
    predicted_delay: f64,
    delayed: bool,
    provenance: flightstat::predictor::Provenance,
    seq: u64,
}

impl PredictionBody {
    fn new(p: &Prediction, event: &PredictionEvent) -> Self {
        PredictionBody {
            model: p.model.name(),
            label: p.model.label(),
            predicted_delay: p.minutes,
            delayed: p.delayed,
            provenance: p.provenance.clone(),
            seq: event.seq,
        }
    }
}

async fn predict(State(state): State<Shared>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: PredictRequest = parse_body(&body)?;
    let all = req.model.as_deref().map(str::trim) == Some("all");
    let kinds = match req.model.as_deref() {
        _ if all => ModelKind::ALL.to_vec(),
        Some(name) => vec![name.parse::<ModelKind>()?],
        None => vec![state.default_model],
    };
    for kind in &kinds {
        if state.registry.get(*kind).is_none() {
            return Err(Error::NotFound(format!("model {:?} is not loaded", kind.name())).into());
        }
    }
    let resolved = resolve_request(&req, &state.registry.routes)?;
    // every prediction must succeed before anything is logged
    let predictions = kinds
        .iter()
        .map(|k| state.registry.predict(*k, &resolved.query))
        .collect::<Result<Vec<_>>>()?;
    let mut bodies = Vec::with_capacity(predictions.len());
    for p in &predictions {
        let event = state.store.events.append(resolved.summary.clone(), p)?;
        bodies.push(PredictionBody::new(p, &event));
    }
    let value = if all {
        json!({ "predictions": bodies })
    } else {
        serde_json::to_value(&bodies[0])
            .map_err(|e| ApiError::from(Error::Corrupt(e.to_string())))?
    };
    Ok(Json(value))
}

fn session_body(session: &DialogSession) -> Value {
    json!({
        "id": session.id,
        "state": session.state.name(),
        "intent": session.intent,
        "slots": session.slots,
        "next_slot": session.next_slot().map(|s| s.prompt()),
        "closed": session.is_closed(),
        "transcript": session.transcript,
    })
}

async fn create_session(State(state): State<Shared>) -> (StatusCode, Json<Value>) {
    let id = uuid::Uuid::new_v4().simple().to_string();
    let (session, text) = DialogSession::start(id, Utc::now().date_naive());
    let mut body = session_body(&session);
    body["text"] = json!(text);
    state.sessions.insert(session);
    (StatusCode::CREATED, Json(body))
}

fn checkout(state: &AppState, id: &str) -> ApiResult<tokio::sync::OwnedMutexGuard<DialogSession>> {
    match state.sessions.checkout(id) {
        Checkout::Ready(guard) => Ok(guard),
        Checkout::Busy => Err(ApiError::new(
            StatusCode::CONFLICT,
            "a previous turn for this session is still in progress",
        )),
        Checkout::Missing => Err(ApiError::not_found(format!("no session {id:?}"))),
    }
}

async fn get_session(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let session = checkout(&state, &id)?;
    Ok(Json(session_body(&session)))
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceBody {
    text: String,
}

async fn post_utterance(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let mut session = checkout(&state, &id)?;
    let utterance: UtteranceBody = parse_body(&body)?;
    let kind = state.default_model;
    let predict = |r: &FlightRequest| {
        let resolved = resolve_request(&PredictRequest::from(r), &state.registry.routes)?;
        state.registry.predict(kind, &resolved.query)
    };
    let ctx = DialogContext {
        flights: &state.store.flights,
        events: Some(&state.store.events),
        predict: &predict,
        now: Utc::now().naive_utc(),
    };
    let (text, done) = session.respond(&utterance.text, &ctx)?;
    let mut reply = session_body(&session);
    reply["text"] = json!(text);
    if let Some(done) = done {
        reply["fulfillment"] = json!({
            "event_seq": done.event.as_ref().map(|e| e.seq),
            "error": done.error,
        });
    }
    Ok(Json(reply))
}

async fn list_flights(State(state): State<Shared>) -> Json<Value> {
    Json(json!({ "flights": state.store.flights.list() }))
}

async fn get_flight(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let flight = state
        .store
        .flights
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no flight {id:?}")))?;
    Ok(Json(json!(flight)))
}

async fn add_flight(
    State(state): State<Shared>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let flight: NewFlight = parse_body(&body)?;
    let added = state.store.flights.add(flight)?;
    Ok((StatusCode::CREATED, Json(json!(added))))
}

async fn remove_flight(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    Ok(Json(json!(state.store.flights.remove(&id)?)))
}

/// Parses `from`/`to` (RFC 3339, half-open) and `seq_from`/`seq_to`
/// (inclusive). Unknown parameters are rejected.
pub fn parse_window(params: &HashMap<String, String>) -> std::result::Result<EventWindow, String> {
    let mut window = EventWindow::default();
    for (key, value) in params {
        let value = value.trim();
        let time = || {
            DateTime::parse_from_rfc3339(value)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|_| format!("{key} {value:?} is not an RFC 3339 timestamp"))
        };
        let seq = || {
            value
                .parse::<u64>()
                .map_err(|_| format!("{key} {value:?} is not a sequence number"))
        };
        match key.as_str() {
            "from" => window.from = Some(time()?),
            "to" => window.to = Some(time()?),
            "seq_from" => window.seq_from = Some(seq()?),
            "seq_to" => window.seq_to = Some(seq()?),
            _ => return Err(format!("unknown parameter {key:?}")),
        }
    }
    if let (Some(a), Some(b)) = (window.from, window.to) {
        if a > b {
            return Err("from is after to".into());
        }
    }
    if let (Some(a), Some(b)) = (window.seq_from, window.seq_to) {
        if a > b {
            return Err("seq_from is after seq_to".into());
        }
    }
    Ok(window)
}

async fn summary(
    State(state): State<Shared>,
    params: std::result::Result<
        Query<HashMap<String, String>>,
        axum::extract::rejection::QueryRejection,
    >,
) -> ApiResult<Json<Value>> {
    let Query(params) = params.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let window = parse_window(&params).map_err(ApiError::bad_request)?;
    Ok(Json(json!(state.store.events.aggregate(&window)?)))
}

async fn health(State(state): State<Shared>) -> (StatusCode, Json<Value>) {
    let reachable = state.store.is_reachable();
    let status = if reachable {
        StatusCode::OK
    } else {
        StatusCode::SERVICE_UNAVAILABLE
    };
    let body = json!({
        "status": if reachable { "ok" } else { "degraded" },
        "models": state.registry.loaded_at(),
        "default_model": state.default_model.name(),
        "store": { "dir": state.store.dir(), "reachable": reachable },
        "sessions": state.sessions.len(),
    });
    (status, Json(body))
}
