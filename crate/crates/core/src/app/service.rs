//! HTTP service for interactive segmentation, under `/api/v1`.
//!
//! * `POST /sessions` with a PNG body creates a session.
//! * `POST /sessions/{id}/scribbles` merges strokes
//!   (`{"strokes": [{"label": "fg", "runs": [[row, col, len], ...]}]}`) into
//!   the session and returns the new mask.
//! * `POST /sessions/{id}/reset` clears the scribbles.
//! * `GET /healthz` reports the version and model hash.
//!
//! Masks are run-length encoded in row-major order: `counts` alternates
//! background and foreground runs, starting with background (possibly 0).
//! Later strokes override earlier ones pixel by pixel, within a post and
//! across posts, so reposting the same strokes leaves the state unchanged.

use std::collections::HashMap;
use std::io::Cursor;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::commands::{check_features, model_config, model_task};
use super::{AppError, AppResult, Task};
use crate::energy::Labeling;
use crate::flow::FlowOptions;
use crate::learn::{read_model, write_model, Model};
use crate::pipelines::segment::predict_segment;
use crate::pipelines::{ImageGrid, ScribbleMask};

pub const DEFAULT_MAX_PIXELS: usize = 4_000_000;
pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);
const BODY_LIMIT: usize = 64 << 20;

#[derive(Debug, Clone)]
pub struct Settings {
    pub max_pixels: usize,
    /// Idle time after which a session is evicted.
    pub ttl: Duration,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_pixels: DEFAULT_MAX_PIXELS,
            ttl: DEFAULT_TTL,
        }
    }
}

struct Session {
    image: ImageGrid,
    scribbles: ScribbleMask,
}

struct Slot {
    last_used: Mutex<Instant>,
    session: tokio::sync::Mutex<Session>,
}

struct Inner {
    model: Model,
    /// Why the model cannot segment, if it cannot.
    unusable: Option<String>,
    model_hash: String,
    flow: FlowOptions,
    settings: Settings,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// `model_text` is the model file, hashed for `/healthz`.
    pub fn new(model_text: &str, settings: Settings) -> AppResult<Self> {
        let model = read_model(model_text)?;
        let model_hash = hex(&Sha256::digest(model_text.as_bytes()));
        let unusable = match model_task(&model) {
            Ok(Task::Segment) => check_features(&model, Task::Segment).err().map(|e| e.to_string()),
            Ok(t) => Some(format!("model was trained for {}, not segmentation", t.name())),
            Err(e) => Some(e.to_string()),
        };
        let flow = match model_task(&model) {
            Ok(t) => model_config(&model, t).map(|c| c.flow_options()).unwrap_or_default(),
            Err(_) => FlowOptions::default(),
        };
        if let Some(why) = &unusable {
            log::warn!("segmentation requests will fail: {why}");
        }
        Ok(AppState(Arc::new(Inner {
            model,
            unusable,
            model_hash,
            flow,
            settings,
            sessions: Mutex::new(HashMap::new()),
        })))
    }

    pub fn from_model(model: &Model, settings: Settings) -> AppResult<Self> {
        AppState::new(&write_model(model)?, settings)
    }

    pub fn from_model_file(path: &Path, settings: Settings) -> AppResult<Self> {
        let text = super::read_text(path, "model")?;
        AppState::new(&text, settings)
    }

    pub fn model_hash(&self) -> &str {
        &self.0.model_hash
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle for longer than the TTL at `now`; returns how
    /// many were dropped.
    pub fn evict_expired(&self, now: Instant) -> usize {
        let ttl = self.0.settings.ttl;
        let mut sessions = self.0.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| now.saturating_duration_since(*s.last_used.lock().unwrap()) <= ttl);
        before - sessions.len()
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        let slot = self
            .0
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))?;
        *slot.last_used.lock().unwrap() = Instant::now();
        Ok(slot)
    }

    fn require_model(&self) -> Result<(), ApiError> {
        match &self.0.unusable {
            Some(why) => Err(ApiError(StatusCode::CONFLICT, why.clone())),
            None => Ok(()),
        }
    }
}

/// Evicts expired sessions periodically.
pub fn spawn_evictor(state: AppState) -> tokio::task::JoinHandle<()> {
    let period = (state.0.settings.ttl / 4).max(Duration::from_secs(1));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = state.evict_expired(Instant::now());
            if n > 0 {
                log::info!("evicted {n} idle sessions");
            }
        }
    })
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/scribbles", post(post_scribbles))
        .route("/sessions/{id}/reset", post(reset));
    Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        match e {
            AppError::Data(m) | AppError::Usage(m) => ApiError(StatusCode::UNPROCESSABLE_ENTITY, m),
            AppError::Internal(m) => ApiError(StatusCode::INTERNAL_SERVER_ERROR, m),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "version": super::VERSION,
        "model_hash": state.0.model_hash,
        "schema_hash": state.0.model.schema.hash(),
        "segmentation": state.0.unusable.is_none(),
    }))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SessionCreated {
    pub session_id: String,
    pub width: usize,
    pub height: usize,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    state.require_model()?;
    let unprocessable = |m: String| ApiError(StatusCode::UNPROCESSABLE_ENTITY, m);
    let reader = image::ImageReader::new(Cursor::new(&body[..]))
        .with_guessed_format()
        .map_err(|e| unprocessable(e.to_string()))?;
    let (w, h) = reader
        .into_dimensions()
        .map_err(|e| unprocessable(format!("not a readable image: {e}")))?;
    let pixels = w as usize * h as usize;
    if pixels > state.0.settings.max_pixels {
        return Err(ApiError(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("image has {pixels} pixels; the limit is {}", state.0.settings.max_pixels),
        ));
    }
    let image = ImageGrid::from_encoded(&body).map_err(|e| unprocessable(e.to_string()))?;
    if image.width() < 2 || image.height() < 2 {
        return Err(unprocessable("image must be at least 2×2".into()));
    }
    let session_id = hex(&rand::random::<u128>().to_be_bytes());
    let created = SessionCreated {
        session_id: session_id.clone(),
        width: image.width(),
        height: image.height(),
    };
    let slot = Slot {
        last_used: Mutex::new(Instant::now()),
        session: tokio::sync::Mutex::new(Session {
            scribbles: ScribbleMask::empty(image.width(), image.height()),
            image,
        }),
    };
    state.evict_expired(Instant::now());
    state.0.sessions.lock().unwrap().insert(session_id, Arc::new(slot));
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Stroke {
    /// `"fg"` or `"bg"`.
    pub label: String,
    /// `[row, col, len]`: `len` pixels starting at `(row, col)`, rightwards.
    pub runs: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StrokeList {
    pub strokes: Vec<Stroke>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Rle {
    pub encoding: String,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MaskResponse {
    pub width: usize,
    pub height: usize,
    pub mask: Rle,
    pub foreground_pixels: usize,
    pub inference_ms: f64,
}

/// Run-length encoding, alternating runs of 0 and 1, starting with 0.
pub fn rle_encode(mask: &Labeling) -> Vec<usize> {
    let mut counts = vec![0];
    let mut current = false;
    for &b in mask.bits() {
        if b != current {
            counts.push(0);
            current = b;
        }
        *counts.last_mut().unwrap() += 1;
    }
    counts
}

pub fn rle_decode(counts: &[usize]) -> Labeling {
    let bits = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i % 2 == 1, n))
        .collect();
    Labeling::from_bits(bits)
}

/// Applies `strokes` to a copy of `scribbles`.
fn merge(scribbles: &ScribbleMask, strokes: &[Stroke]) -> Result<ScribbleMask, String> {
    let (w, h) = (scribbles.width, scribbles.height);
    let mut out = scribbles.clone();
    for (k, s) in strokes.iter().enumerate() {
        let label = match s.label.as_str() {
            "fg" => true,
            "bg" => false,
            other => return Err(format!("stroke {k}: label must be \"fg\" or \"bg\", got {other:?}")),
        };
        for &[row, col, len] in &s.runs {
            if len == 0 || row >= h || col >= w || len > w - col {
                return Err(format!(
                    "stroke {k}: run [{row}, {col}, {len}] is empty or leaves the {w}×{h} image"
                ));
            }
            for p in row * w + col..row * w + col + len {
                out.labels[p] = Some(label);
            }
        }
    }
    Ok(out)
}

async fn post_scribbles(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<MaskResponse>, ApiError> {
    let slot = state.slot(&id)?;
    state.require_model()?;
    let list: StrokeList = serde_json::from_slice(&body)
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("malformed strokes: {e}")))?;
    let mut session = slot.session.lock().await;
    let merged = merge(&session.scribbles, &list.strokes).map_err(|m| ApiError(StatusCode::UNPROCESSABLE_ENTITY, m))?;
    if merged.is_empty() {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            "no scribbles: at least one labeled pixel is needed".into(),
        ));
    }
    let image = session.image.clone();
    let scribbles = merged.clone();
    let st = state.clone();
    let start = Instant::now();
    let mask = tokio::task::spawn_blocking(move || {
        predict_segment(&st.0.model.schema, &st.0.model.weights, &image, &scribbles, &st.0.flow)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| ApiError::from(AppError::from(e)))?;
    let inference_ms = start.elapsed().as_secs_f64() * 1e3;
    session.scribbles = merged;
    Ok(Json(MaskResponse {
        width: session.image.width(),
        height: session.image.height(),
        foreground_pixels: mask.count_ones(),
        mask: Rle {
            encoding: "rle".into(),
            counts: rle_encode(&mask),
        },
        inference_ms,
    }))
}

async fn reset(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let slot = state.slot(&id)?;
    let mut session = slot.session.lock().await;
    let (w, h) = (session.image.width(), session.image.height());
    session.scribbles = ScribbleMask::empty(w, h);
    Ok(Json(json!({ "session_id": id, "labeled_pixels": 0 })))
}
