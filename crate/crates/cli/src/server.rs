//! HTTP service for the annotation tool.
//!
//! | route                  | effect                                           |
//! |------------------------|--------------------------------------------------|
//! | `GET /api/session`     | cameras, track span, ground truth, frame index   |
//! | `POST /api/geolocate`  | one [`TargetEstimate`] for `{camera_id, t, px, py, target_id?}` |
//! | `POST /api/annotations`| append one annotation to the session's CSV      |
//! | `GET /api/report`      | [`EvaluationReport`] over the current annotations |
//! | `GET /frames/…`        | frame images, `<camera_id>/<t>.jpg`              |
//! | `GET /…`               | static UI assets                                 |
//!
//! Errors are JSON `{"error": <name>, "message": <text>}` with an extra
//! `field` for malformed bodies: 400 for malformed bodies and pixels outside
//! the image, 404 for unknown cameras, 422 for other pipeline failures.
//!
//! The loaded session is an immutable snapshot. Appending an annotation
//! takes the append lock, writes the CSV row, then swaps in a new snapshot;
//! readers never see a half-applied append.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use geopin_core::camera::CalibrationFile;
use geopin_core::pipeline::{evaluate, geolocate, Aggregates, EvaluationReport, PipelineError, TargetEstimate};
use geopin_core::session::{
    append_annotation_csv, load_session, Annotation, GroundTruthTarget, Manifest, Session, SessionError,
    SessionOptions,
};

use crate::args::ServeArgs;
use crate::CliError;

/// One frame image on disk, addressed as `/frames/{camera_id}/{file}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub t: f64,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSpan {
    pub start: f64,
    pub end: f64,
    pub fixes: usize,
}

/// Body of `GET /api/session`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub cameras: Vec<CalibrationFile>,
    pub track: TrackSpan,
    pub ground_truth: Vec<GroundTruthTarget>,
    /// Per camera, frames sorted by time.
    pub frames: BTreeMap<String, Vec<FrameEntry>>,
    pub options: SessionOptions,
    pub annotation_count: usize,
}

/// Body of `POST /api/geolocate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeolocateRequest {
    pub camera_id: String,
    pub t: f64,
    pub px: f64,
    pub py: f64,
    #[serde(default)]
    pub target_id: Option<String>,
}

/// Body of `POST /api/annotations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRequest {
    pub camera_id: String,
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub target_id: String,
}

/// Reply to `POST /api/annotations`: the new annotation's position in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppendReply {
    pub index: usize,
    pub annotation_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

struct ApiFailure(StatusCode, ApiError);

impl ApiFailure {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self(
            status,
            ApiError {
                error: error.into(),
                message: message.into(),
                field: None,
            },
        )
    }
}

impl IntoResponse for ApiFailure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<PipelineError> for ApiFailure {
    fn from(e: PipelineError) -> Self {
        let status = match e.name() {
            "UnknownCamera" => StatusCode::NOT_FOUND,
            "PixelOutOfBounds" | "InvalidPixel" => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.name(), e.to_string())
    }
}

/// Session plus its lazily computed report.
struct Snapshot {
    session: Session,
    report: OnceLock<EvaluationReport>,
}

impl Snapshot {
    fn new(session: Session) -> Arc<Self> {
        Arc::new(Self {
            session,
            report: OnceLock::new(),
        })
    }

    fn report(&self) -> &EvaluationReport {
        self.report.get_or_init(|| match evaluate(&self.session) {
            Ok(r) => r,
            // an empty log has an empty report
            Err(_) => EvaluationReport {
                heading_mode: self.session.options.heading_mode,
                distance_mode: self.session.options.distance_mode,
                pose_mode: self.session.options.pose_mode,
                rows: Vec::new(),
                failures: Vec::new(),
                aggregates: Aggregates::from_rows(&[], self.session.options.reporting_radius_m),
            },
        })
    }
}

pub struct AppState {
    annotations_path: PathBuf,
    frames: BTreeMap<String, Vec<FrameEntry>>,
    snapshot: RwLock<Arc<Snapshot>>,
    append: tokio::sync::Mutex<()>,
}

impl AppState {
    /// Load the session behind `manifest_path` and index `frames_dir`.
    pub fn load(manifest_path: &Path, frames_dir: &Path) -> Result<Self, SessionError> {
        let session = load_session(manifest_path)?;
        let annotations_path = Manifest::read(manifest_path)?.annotations_path(manifest_path);
        let frames = index_frames(frames_dir, session.cameras.keys());
        Ok(Self {
            annotations_path,
            frames,
            snapshot: RwLock::new(Snapshot::new(session)),
            append: tokio::sync::Mutex::new(()),
        })
    }

    fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn session(&self) -> Session {
        self.current().session.clone()
    }
}

/// `<dir>/<camera_id>/<t>.jpg` files whose stem parses as a time.
fn index_frames<'a>(dir: &Path, cameras: impl Iterator<Item = &'a String>) -> BTreeMap<String, Vec<FrameEntry>> {
    cameras
        .map(|id| {
            let mut frames: Vec<FrameEntry> = std::fs::read_dir(dir.join(id))
                .into_iter()
                .flatten()
                .filter_map(|e| {
                    let name = e.ok()?.file_name().into_string().ok()?;
                    let t = name.strip_suffix(".jpg")?.parse::<f64>().ok().filter(|t| t.is_finite())?;
                    Some(FrameEntry {
                        t,
                        url: format!("/frames/{id}/{name}"),
                    })
                })
                .collect();
            frames.sort_by(|a, b| a.t.total_cmp(&b.t));
            (id.clone(), frames)
        })
        .collect()
}

/// Parse a JSON body, naming the offending field on failure.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiFailure> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        ApiFailure(
            StatusCode::BAD_REQUEST,
            ApiError {
                error: "BadRequest".into(),
                message: e.inner().to_string(),
                field: (field != ".").then_some(field),
            },
        )
    })
}

async fn get_session(State(state): State<Arc<AppState>>) -> Json<SessionView> {
    let snap = state.current();
    let s = &snap.session;
    let (start, end) = s.track.span();
    Json(SessionView {
        cameras: s.cameras.values().map(|c| c.to_file()).collect(),
        track: TrackSpan {
            start,
            end,
            fixes: s.track.len(),
        },
        ground_truth: s.ground_truth.values().cloned().collect(),
        frames: state.frames.clone(),
        options: s.options.clone(),
        annotation_count: s.annotations.len(),
    })
}

async fn post_geolocate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<TargetEstimate>, ApiFailure> {
    let req: GeolocateRequest = parse_body(&body)?;
    let annotation = Annotation {
        t: req.t,
        camera_id: req.camera_id,
        px: req.px,
        py: req.py,
        target_id: req.target_id.unwrap_or_default(),
    };
    let snap = state.current();
    Ok(Json(geolocate(&snap.session, &annotation)?))
}

async fn post_annotation(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<(StatusCode, Json<AppendReply>), ApiFailure> {
    let req: AnnotationRequest = parse_body(&body)?;
    let annotation = Annotation {
        t: req.t,
        camera_id: req.camera_id,
        px: req.px,
        py: req.py,
        target_id: req.target_id,
    };

    let _guard = state.append.lock().await;
    let current = state.current();
    let index = current.session.annotations.len();
    // header is line 1
    let line = index as u64 + 2;
    current
        .session
        .validate_annotation(&annotation, &state.annotations_path, line)
        .map_err(|e| match &e {
            SessionError::DanglingReference { kind, .. } if *kind == "camera" => {
                ApiFailure::new(StatusCode::NOT_FOUND, "UnknownCamera", e.to_string())
            }
            SessionError::PixelOutOfBounds { .. } => {
                ApiFailure::new(StatusCode::BAD_REQUEST, "PixelOutOfBounds", e.to_string())
            }
            _ => ApiFailure::new(StatusCode::BAD_REQUEST, "InvalidAnnotation", e.to_string()),
        })?;
    let path = state.annotations_path.clone();
    let row = annotation.clone();
    tokio::task::spawn_blocking(move || append_annotation_csv(&path, &row))
        .await
        .map_err(|e| ApiFailure::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
        .map_err(|e| ApiFailure::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", e.to_string()))?;

    let mut next = current.session.clone();
    next.annotations.push(annotation);
    *state.snapshot.write().expect("snapshot lock") = Snapshot::new(next);
    Ok((
        StatusCode::CREATED,
        Json(AppendReply {
            index,
            annotation_count: index + 1,
        }),
    ))
}

async fn get_report(State(state): State<Arc<AppState>>) -> Result<Response, ApiFailure> {
    let snap = state.current();
    let json = tokio::task::spawn_blocking(move || serde_json::to_vec(snap.report()).expect("report serializes"))
        .await
        .map_err(|e| ApiFailure::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], json).into_response())
}

/// API routes, frame images and, when given, static assets at `/`.
pub fn router(state: Arc<AppState>, frames_dir: &Path, assets: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/session", get(get_session))
        .route("/api/geolocate", post(post_geolocate))
        .route("/api/annotations", post(post_annotation))
        .route("/api/report", get(get_report))
        .with_state(state)
        .nest_service("/frames", ServeDir::new(frames_dir));
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub fn cmd_serve(args: &ServeArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let frames_dir = args.frames.clone().unwrap_or_else(|| {
        args.manifest
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("frames")
    });
    let state = Arc::new(AppState::load(&args.manifest, &frames_dir)?);
    let app = router(state, &frames_dir, args.assets.as_deref());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Server(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| CliError::Server(format!("bind {}:{}: {e}", args.host, args.port)))?;
        let addr: SocketAddr = listener.local_addr().map_err(|e| CliError::Server(e.to_string()))?;
        let _ = writeln!(err, "serving {} on http://{addr}", args.manifest.display());
        axum::serve(listener, app).await.map_err(|e| CliError::Server(e.to_string()))
    })
}
