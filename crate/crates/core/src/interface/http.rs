use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::facedb::{FaceDb, FaceDbError};
use crate::imagecore::decode_image;
use crate::pipeline::process_frame;
use crate::recognizer::Gallery;

use super::stream::{EnrollRequest, EnrollmentStatus, ObservationRecord, PersonSummary, StreamState};
use super::{Engine, ServiceConfig, ServiceError};

const MAX_BODY: usize = 32 * 1024 * 1024;

type Stream = Arc<tokio::sync::Mutex<StreamState>>;

/// Shared service state.
pub struct AppState {
    engine: Option<Arc<Engine>>,
    db: Arc<FaceDb>,
    gallery: Gallery,
    streams: Mutex<HashMap<u64, Stream>>,
    next_stream: AtomicU64,
    max_age: u32,
    target_count: usize,
}

impl AppState {
    /// `engine` is `None` when models are unavailable; model-dependent
    /// endpoints then answer 503.
    pub fn new(engine: Option<Engine>, db: FaceDb, cfg: &ServiceConfig) -> Self {
        let gallery = Gallery::new(db.load_gallery());
        AppState {
            engine: engine.map(Arc::new),
            db: Arc::new(db),
            gallery,
            streams: Mutex::new(HashMap::new()),
            next_stream: AtomicU64::new(0),
            max_age: cfg.max_age,
            target_count: cfg.target_count,
        }
    }

    pub fn gallery(&self) -> &Gallery {
        &self.gallery
    }

    pub fn db(&self) -> &FaceDb {
        &self.db
    }

    fn engine(&self) -> Result<Arc<Engine>, ServiceError> {
        self.engine.clone().ok_or(ServiceError::Unavailable("models are not loaded".into()))
    }

    fn stream(&self, sid: u64) -> Result<Stream, ServiceError> {
        self.streams
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&sid)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no stream {sid}")))
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::BadRequest(_) | ServiceError::Image(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Db(FaceDbError::NotFound(_) | FaceDbError::CropNotFound { .. }) => StatusCode::NOT_FOUND,
            ServiceError::Db(FaceDbError::InvalidInput(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

#[derive(Deserialize, Default)]
struct DetectQuery {
    #[serde(default)]
    recognize: bool,
}

async fn detect_handler(
    State(app): State<Arc<AppState>>,
    Query(q): Query<DetectQuery>,
    body: Bytes,
) -> Result<Json<Vec<ObservationRecord>>, ServiceError> {
    let engine = app.engine()?;
    let img = decode_image(&body)?;
    let gallery = q.recognize.then(|| app.gallery.clone());
    let obs = blocking(move || {
        Ok(process_frame(&img, &engine.cascade, &engine.attributes, gallery.as_ref(), None, &engine.pipeline)?)
    })
    .await?;
    Ok(Json(obs.into_iter().map(|o| ObservationRecord { observation: o, prompt: None }).collect()))
}

#[derive(Serialize, Deserialize)]
pub struct StreamCreated {
    pub stream_id: u64,
}

async fn create_stream(State(app): State<Arc<AppState>>) -> (StatusCode, Json<StreamCreated>) {
    let sid = app.next_stream.fetch_add(1, Ordering::Relaxed);
    let state = StreamState::new(app.max_age, app.target_count);
    app.streams.lock().unwrap_or_else(|e| e.into_inner()).insert(sid, Arc::new(tokio::sync::Mutex::new(state)));
    (StatusCode::CREATED, Json(StreamCreated { stream_id: sid }))
}

async fn frame_handler(
    State(app): State<Arc<AppState>>,
    Path(sid): Path<u64>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let stream = app.stream(sid)?;
    let engine = app.engine()?;
    let img = decode_image(&body)?;
    let mut guard = stream.lock_owned().await;
    let app2 = app.clone();
    let resp = blocking(move || guard.process(&img, &engine, &app2.db, &app2.gallery)).await?;
    Ok(Json(resp).into_response())
}

async fn enroll_handler(
    State(app): State<Arc<AppState>>,
    Path(sid): Path<u64>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let stream = app.stream(sid)?;
    let req: EnrollRequest =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("bad enroll request: {e}")))?;
    let mut guard = stream.lock_owned().await;
    let app2 = app.clone();
    let status = blocking(move || guard.answer(&req, &app2.db, &app2.gallery)).await?;
    let code = match status {
        EnrollmentStatus::Enrolled { .. } => StatusCode::CREATED,
        EnrollmentStatus::Collecting { .. } => StatusCode::ACCEPTED,
        _ => StatusCode::OK,
    };
    Ok((code, Json(status)).into_response())
}

async fn list_persons(State(app): State<Arc<AppState>>) -> Json<Vec<PersonSummary>> {
    Json(app.gallery.snapshot().iter().map(PersonSummary::from).collect())
}

#[derive(Deserialize)]
struct NameBody {
    name: String,
}

async fn rename_person(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Bytes,
) -> Result<Json<PersonSummary>, ServiceError> {
    let req: NameBody =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("bad rename request: {e}")))?;
    let app2 = app.clone();
    let record = blocking(move || {
        let record = app2.db.set_name(id, &req.name)?;
        app2.gallery.upsert(record.clone());
        Ok(record)
    })
    .await?;
    Ok(Json(PersonSummary::from(&record)))
}

async fn get_crop(State(app): State<Arc<AppState>>, Path((id, n)): Path<(u64, usize)>) -> Result<Response, ServiceError> {
    let bytes = app.db.crop_bytes(id, n)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn health(State(app): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "models_loaded": app.engine.is_some(), "persons": app.gallery.len() }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/detect", post(detect_handler))
        .route("/streams", post(create_stream))
        .route("/streams/:sid/frames", post(frame_handler))
        .route("/streams/:sid/enroll", post(enroll_handler))
        .route("/persons", get(list_persons))
        .route("/persons/:id/name", put(rename_person))
        .route("/persons/:id/crops/:n", get(get_crop))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, bind: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((bind, port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
