//! HTTP API over [`Session`].
//!
//! Writes to one session are serialized by a per-session async mutex and run
//! on the blocking pool; reads clone the latest published snapshot.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use partgrasp::grasp::GraspRecord;
use partgrasp::perception::{
    ActionSequence, BackendError, ChatBackend, FailedAttempt, InferenceError, Turn,
};
use partgrasp::scene::{color_png_bytes, CameraIntrinsics, InventoryEntry, SceneDescription};
use partgrasp::BinaryMask;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::session::{Session, SessionError, SessionState, StepResult};

struct Slot {
    writer: tokio::sync::Mutex<()>,
    snapshot: RwLock<Arc<Session>>,
}

impl Slot {
    fn snapshot(&self) -> Arc<Session> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    fn publish(&self, s: Session) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(s);
    }
}

pub struct AppState {
    backend: Arc<dyn ChatBackend>,
    config: PipelineConfig,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(backend: Arc<dyn ChatBackend>, config: PipelineConfig) -> Self {
        Self {
            backend,
            config,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/steps/next", post(next_step))
        .route("/sessions/{id}/frame", get(frame_png))
        .route("/sessions/{id}/masks/{step}", get(mask_png))
        .route("/sessions/{id}/grasps/{step}", get(grasps))
        .with_state(Arc::new(state))
}

/// JSON error body: `{"error": {"code", "message", "field"?, "details"?}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    field: Option<String>,
    details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            field: None,
            details: None,
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut err = json!({"code": self.code, "message": self.message});
        if let Some(f) = self.field {
            err["field"] = Value::String(f);
        }
        if let Some(d) = self.details {
            err["details"] = d;
        }
        (self.status, Json(json!({ "error": err }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::State { state, .. } => {
                let mut err = ApiError::new(StatusCode::CONFLICT, "invalid_state", message);
                err.details = Some(json!({ "state": state }));
                err
            }
            SessionError::Scene(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_scene", message),
            SessionError::Io(_) => ApiError::internal(message),
            SessionError::Inference(InferenceError::Backend(b)) => {
                let code = match b {
                    BackendError::Unavailable(_) => "backend_unavailable",
                    BackendError::NoMatch(_) => "backend_no_match",
                };
                ApiError::new(StatusCode::BAD_GATEWAY, code, message)
            }
            SessionError::Inference(InferenceError::MalformedOutput { attempts }) => {
                let mut err = ApiError::new(StatusCode::BAD_GATEWAY, "malformed_output", message);
                err.details = Some(json!({ "attempts": attempts_json(&attempts) }));
                err
            }
            SessionError::Inference(InferenceError::History(_)) => ApiError::internal(message),
        }
    }
}

fn attempts_json(attempts: &[FailedAttempt]) -> Value {
    serde_json::to_value(attempts).expect("attempts serialize")
}

/// Deserializes a JSON body; field errors map to 422 with the field path.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        if inner.is_syntax() || inner.is_eof() {
            return ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", inner.to_string());
        }
        let path = e.path().to_string();
        let msg = inner.to_string();
        let missing = msg
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
            .map(str::to_string);
        let field = match (path.as_str(), missing) {
            (".", Some(m)) => m,
            (p, Some(m)) => format!("{p}.{m}"),
            (p, None) => p.to_string(),
        };
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_field", format!("`{field}`: {msg}"));
        err.field = Some(field);
        err
    })
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    scene: SceneDescription<f64>,
    /// Grasp sampling seed; the configured seed when absent.
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct SessionView<'a> {
    id: &'a str,
    state: SessionState,
    cursor: usize,
    intrinsics: &'a CameraIntrinsics<f64>,
    inventory: &'a [InventoryEntry],
    transcript: &'a [Turn],
    sequence: Option<&'a ActionSequence>,
    steps: Vec<&'a StepResult>,
}

fn view(s: &Session) -> Value {
    let v = SessionView {
        id: s.id(),
        state: s.state(),
        cursor: s.cursor(),
        intrinsics: s.intrinsics(),
        inventory: s.inventory(),
        transcript: s.history().turns(),
        sequence: s.sequence(),
        steps: s.steps().iter().map(|r| &r.result).collect(),
    };
    serde_json::to_value(v).expect("session view serializes")
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let mut config = app.config.clone();
    if let Some(seed) = req.seed {
        config.grasp.seed = seed;
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let with_image = app.backend.supports_images();
    let sid = id.clone();
    let session = blocking(move || Session::create(sid, req.scene, config, with_image)).await??;
    let body = view(&session);
    let slot = Arc::new(Slot {
        writer: tokio::sync::Mutex::new(()),
        snapshot: RwLock::new(Arc::new(session)),
    });
    app.sessions.write().expect("session map lock poisoned").insert(id, slot);
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(view(&app.slot(&id)?.snapshot())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PostMessage {
    text: String,
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: PostMessage = parse_body(&body)?;
    let slot = app.slot(&id)?;
    let _write = slot.writer.lock().await;
    let mut session = (*slot.snapshot()).clone();
    let backend = app.backend.clone();
    let (session, outcome) = blocking(move || {
        let out = session.post_message(&*backend, &req.text);
        (session, out)
    })
    .await?;
    let state = session.state();
    slot.publish(session);
    let mut body = serde_json::to_value(outcome?).expect("outcome serializes");
    body["state"] = json!(state);
    Ok(Json(body))
}

async fn next_step(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = app.slot(&id)?;
    let _write = slot.writer.lock().await;
    let mut session = (*slot.snapshot()).clone();
    let (session, result) = blocking(move || {
        let out = session.execute_step().cloned();
        (session, out)
    })
    .await?;
    let result = result?;
    let body = json!({"state": session.state(), "cursor": session.cursor(), "step": result});
    slot.publish(session);
    Ok(Json(body))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn frame_png(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = app.slot(&id)?.snapshot();
    let bytes = blocking(move || color_png_bytes(session.frame())).await?;
    Ok(png(bytes.map_err(|e| ApiError::internal(e.to_string()))?))
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Layer {
    #[default]
    Target,
    Expanded,
    /// Expanded minus target.
    Ring,
}

#[derive(Deserialize)]
struct MaskQuery {
    #[serde(default)]
    layer: Layer,
}

fn step_missing(step: usize) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown_step", format!("step {step} has no recorded result"))
}

async fn mask_png(
    State(app): State<Arc<AppState>>,
    Path((id, step)): Path<(String, usize)>,
    Query(q): Query<MaskQuery>,
) -> Result<Response, ApiError> {
    let session = app.slot(&id)?.snapshot();
    let artifacts = session
        .step(step)
        .ok_or_else(|| step_missing(step))?
        .artifacts
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_mask", format!("step {step} produced no mask")))?;
    let mask = match q.layer {
        Layer::Target => artifacts.target_mask.clone(),
        Layer::Expanded => artifacts.expanded_mask.clone(),
        Layer::Ring => {
            let (t, e) = (&artifacts.target_mask, &artifacts.expanded_mask);
            BinaryMask::from_fn(e.width(), e.height(), |x, y| e.get(x, y) && !t.get(x, y))
        }
    };
    let bytes = mask.to_png_bytes().map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(png(bytes))
}

#[derive(Serialize)]
struct GraspsView<'a> {
    index: usize,
    candidates: usize,
    top1_pixel: Option<[f64; 2]>,
    grasps: &'a [GraspRecord],
}

async fn grasps(
    State(app): State<Arc<AppState>>,
    Path((id, step)): Path<(String, usize)>,
) -> Result<Json<Value>, ApiError> {
    let session = app.slot(&id)?.snapshot();
    let r = &session.step(step).ok_or_else(|| step_missing(step))?.result;
    let v = GraspsView {
        index: r.index,
        candidates: r.candidates,
        top1_pixel: r.top1_pixel,
        grasps: &r.grasps,
    };
    Ok(Json(serde_json::to_value(v).expect("grasps serialize")))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
