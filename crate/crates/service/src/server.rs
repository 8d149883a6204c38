//! HTTP endpoints. Every JSON response is an envelope `{ok, data | error}`.
//!
//! `/api/telemetry` upgrades to a WebSocket when asked and otherwise answers
//! with a chunked newline-delimited stream. Both carry the same records.

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use birs_core::model::to_exchange_string;
use birs_core::WeightConfig;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tower_http::cors::CorsLayer;

use crate::docs::{plan_document, room_infos, GridDocument, GridLayer};
use crate::error::{ok, ApiError};
use crate::session::{Command, Session, Subscription};

type Shared = State<Arc<Session>>;

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/api/model", get(get_model))
        .route("/api/rooms", get(get_rooms))
        .route("/api/grid", get(get_grid))
        .route("/api/weights", get(get_weights).put(put_weights))
        .route("/api/plan", post(post_plan))
        .route("/api/hazard", post(post_hazard))
        .route("/api/mission", get(get_mission))
        .route("/api/mission/start", post(post_mission_start))
        .route("/api/mission/abort", post(post_mission_abort))
        .route("/api/telemetry", get(telemetry))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint") })
        .layer(CorsLayer::permissive())
        .with_state(session)
}

/// Parses a JSON body, reporting syntax and shape problems in the envelope.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if bytes.is_empty() { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| {
        ApiError::bad_request(e.to_string()).with_details(json!({ "line": e.line(), "column": e.column() }))
    })
}

async fn get_model(State(s): Shared) -> Response {
    let text = to_exchange_string(&s.model_snapshot());
    let doc: Value = serde_json::from_str(&text).expect("exchange document is JSON");
    ok(doc)
}

async fn get_rooms(State(s): Shared) -> Response {
    ok(room_infos(&s.model_snapshot(), &s.config_snapshot(), s.today))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridQuery {
    #[serde(default)]
    layer: GridLayer,
    #[serde(default)]
    format: Option<String>,
}

async fn get_grid(State(s): Shared, q: Result<Query<GridQuery>, axum::extract::rejection::QueryRejection>) -> Response {
    let Query(q) = match q {
        Ok(q) => q,
        Err(e) => return ApiError::bad_request(e.body_text()).into_response(),
    };
    let grid = q.layer.pick(&s.maps);
    match q.format.as_deref() {
        None | Some("json") => ok(GridDocument::new(q.layer, grid)),
        Some("pgm") => ([(header::CONTENT_TYPE, "image/x-portable-graymap")], grid.to_pgm()).into_response(),
        Some(other) => ApiError::bad_request(format!("unknown format {other}; expected json or pgm")).into_response(),
    }
}

async fn get_weights(State(s): Shared) -> Response {
    ok(s.config_snapshot())
}

async fn put_weights(State(s): Shared, bytes: Bytes) -> Result<Response, ApiError> {
    let config: WeightConfig = body(&bytes)?;
    config
        .validate()
        .map_err(|e| ApiError::validation(e.to_string()).with_details(json!({ "rejected": &config })))?;
    *s.config.write().expect("config lock") = config.clone();
    let (reply, done) = oneshot::channel();
    s.send(Command::Weights {
        config: config.clone(),
        reply,
    })
    .await?;
    let _ = done.await;
    Ok(ok(config))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    #[serde(default)]
    from: Option<String>,
    to: String,
    /// One-off weights for this plan; the stored config is untouched.
    #[serde(default)]
    weights: Option<WeightConfig>,
}

/// Explicit `from`, else the robot's room.
fn resolve_from(s: &Session, from: Option<String>) -> Result<String, ApiError> {
    from.or_else(|| s.mission_snapshot().room_id)
        .ok_or_else(|| ApiError::validation("`from` is required: the robot's room is unknown"))
}

async fn post_plan(State(s): Shared, bytes: Bytes) -> Result<Response, ApiError> {
    let req: PlanRequest = body(&bytes)?;
    let config = match req.weights {
        Some(w) => {
            w.validate().map_err(|e| ApiError::validation(e.to_string()))?;
            w
        }
        None => s.config_snapshot(),
    };
    let from = resolve_from(&s, req.from)?;
    let model = s.model_snapshot();
    let session = Arc::clone(&s);
    let doc = tokio::task::spawn_blocking(move || {
        plan_document(&model, &config, session.today, &session.maps.plan, &from, &req.to)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(ok(doc))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HazardRequest {
    room_id: String,
    active: bool,
}

async fn post_hazard(State(s): Shared, bytes: Bytes) -> Result<Response, ApiError> {
    let req: HazardRequest = body(&bytes)?;
    let (reply, rx) = oneshot::channel();
    s.send(Command::Hazard {
        room_id: req.room_id,
        active: req.active,
        reply,
    })
    .await?;
    let outcome = rx.await.map_err(|_| ApiError::internal("mission loop stopped"))??;
    Ok(ok(outcome))
}

async fn get_mission(State(s): Shared) -> Response {
    ok(s.mission_snapshot())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartRequest {
    #[serde(default)]
    from: Option<String>,
    to: String,
}

async fn post_mission_start(State(s): Shared, bytes: Bytes) -> Result<Response, ApiError> {
    let req: StartRequest = body(&bytes)?;
    let from = resolve_from(&s, req.from)?;
    let (reply, rx) = oneshot::channel();
    s.send(Command::Start { from, to: req.to, reply }).await?;
    let snap = rx.await.map_err(|_| ApiError::internal("mission loop stopped"))??;
    Ok(ok(snap))
}

async fn post_mission_abort(State(s): Shared) -> Result<Response, ApiError> {
    let (reply, rx) = oneshot::channel();
    s.send(Command::Abort { reply }).await?;
    let snap = rx.await.map_err(|_| ApiError::internal("mission loop stopped"))??;
    Ok(ok(snap))
}

async fn telemetry(State(s): Shared, ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>) -> Response {
    let sub = s.subscribe();
    match ws {
        Ok(ws) => ws.on_upgrade(move |socket| forward(socket, sub)),
        Err(_) => {
            let lines = futures::stream::unfold(sub, |mut sub| async move {
                let line = sub.recv().await?;
                Some((Ok::<_, std::convert::Infallible>(Bytes::from(format!("{line}\n"))), sub))
            });
            ([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(lines)).into_response()
        }
    }
}

async fn forward(mut socket: WebSocket, mut sub: Subscription) {
    loop {
        tokio::select! {
            line = sub.recv() => match line {
                Some(line) => {
                    if socket.send(Message::Text(line.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
