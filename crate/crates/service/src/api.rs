use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use palimpsest_core::pipeline::{self, PreparedInput};
use palimpsest_core::raster::encode_png;
use palimpsest_core::{
    BitDepth, Error, ErrorCategory, NormalizeScope, PipelineConfig, Raster, Rect, TrainingSet,
};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;
use tower_http::services::ServeDir;

use crate::imaging::{downsample, parse_scale};
use crate::session::{run_config, LoadedStack, RunRecord, RunRequest, RunStatus, Session};
use crate::ServiceConfig;

const PLACEHOLDER: &str = "<!doctype html><title>palimpsest</title>\
<p>No UI bundle configured. The API is under <code>/api/</code>.</p>";

struct Job {
    run_id: String,
    input: PreparedInput,
    config: PipelineConfig,
}

struct Shared {
    session: Mutex<Session>,
    queue: mpsc::UnboundedSender<Job>,
    out_dir: PathBuf,
}

type AppState = Arc<Shared>;

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// The service router. Must be called inside a tokio runtime: it spawns the
/// run worker.
pub fn router(config: ServiceConfig) -> Router {
    let (tx, rx) = mpsc::unbounded_channel();
    let state = Arc::new(Shared {
        session: Mutex::new(Session::new()),
        queue: tx,
        out_dir: config.out_dir,
    });
    tokio::spawn(worker(Arc::clone(&state), rx));

    let api = Router::new()
        .route("/api/session", get(get_session))
        .route("/api/session/stack", post(post_stack))
        .route("/api/bands", get(get_bands))
        .route("/api/band/{id}", get(get_band))
        .route("/api/annotations", put(put_annotations).get(get_annotations))
        .route("/api/runs", post(post_run))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/artifact/{name}", get(get_artifact))
        .with_state(state);

    match config.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

/// Runs jobs strictly one at a time, in the order they were queued.
async fn worker(state: AppState, mut rx: mpsc::UnboundedReceiver<Job>) {
    while let Some(job) = rx.recv().await {
        if let Some(r) = state.lock().run_mut(&job.run_id) {
            r.status = RunStatus::Running;
        }
        let Job {
            run_id,
            input,
            config,
        } = job;
        let result = tokio::task::spawn_blocking(move || pipeline::execute(&input, &config)).await;
        let mut session = state.lock();
        let Some(record) = session.run_mut(&run_id) else {
            continue;
        };
        match result {
            Ok(Ok(out)) => record.finish(out),
            Ok(Err(e)) => {
                log::warn!("{run_id} failed: {e}");
                record.fail(e.to_string());
            }
            Err(e) => record.fail(format!("run aborted: {e}")),
        }
    }
}

struct ApiError {
    status: StatusCode,
    message: String,
    line: Option<usize>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            line: None,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.category() {
            ErrorCategory::Usage => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let line = match &e {
            Error::Annotation { line, .. } => Some(*line),
            _ => None,
        };
        ApiError {
            status,
            message: e.to_string(),
            line,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(line) = self.line {
            body["line"] = json!(line);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_json<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")))
}

fn stack_json(s: &LoadedStack) -> Value {
    json!({
        "manifest": s.manifest,
        "crop": s.crop,
        "normalize": s.scope,
        "width": s.stack.width(),
        "height": s.stack.height(),
        "bands": s.stack.band_count(),
        "source_bit_depth": s.stack.source_bit_depth(),
    })
}

fn counts(training: &TrainingSet) -> BTreeMap<String, usize> {
    training.class_counts().into_iter().collect()
}

async fn get_session(State(state): State<AppState>) -> Json<Value> {
    let s = state.lock();
    Json(json!({
        "session_id": s.id,
        "stack": s.stack.as_ref().map(stack_json),
        "annotations": s.training.as_ref().map(counts),
        "version": s.version,
        "runs": s.runs.iter().map(|r| &r.run_id).collect::<Vec<_>>(),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StackRequest {
    manifest: PathBuf,
    #[serde(default)]
    crop: Option<Rect>,
    #[serde(default)]
    normalize: NormalizeScope,
}

async fn post_stack(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: StackRequest = parse_json(&body)?;
    let manifest = req.manifest.clone();
    let (stack, warnings, sha) = tokio::task::spawn_blocking(move || {
        pipeline::load_stack(&req.manifest, req.crop, req.normalize)
            .map(|(st, w, sha)| ((st, req.crop, req.normalize), w, sha))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let (stack, crop, scope) = stack;
    let loaded = LoadedStack {
        manifest,
        crop,
        scope,
        manifest_sha256: sha,
        stack: Arc::new(stack),
    };
    let mut s = state.lock();
    let body = stack_json(&loaded);
    s.stack = Some(loaded);
    // points refer to the previous page
    s.training = None;
    s.version += 1;
    Ok(Json(json!({
        "stack": body,
        "warnings": warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "version": s.version,
    })))
}

async fn get_bands(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let s = state.lock();
    let stack = s
        .stack
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no stack loaded"))?;
    let bands: Vec<Value> = stack
        .stack
        .bands()
        .iter()
        .map(|b| {
            json!({
                "band_id": b.meta.band_id,
                "wavelength_nm": b.meta.wavelength_nm,
                "illumination": b.meta.illumination,
                "filter": b.meta.filter,
            })
        })
        .collect();
    Ok(Json(json!({
        "width": stack.stack.width(),
        "height": stack.stack.height(),
        "bands": bands,
    })))
}

#[derive(Deserialize)]
struct ScaleQuery {
    scale: Option<String>,
}

async fn get_band(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ScaleQuery>,
) -> ApiResult<Response> {
    let factor = match q.scale.as_deref() {
        None => 1,
        Some(s) => parse_scale(s).ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("scale must be one of 1, 1/2, 1/4, 1/8; got '{s}'"),
            )
        })?,
    };
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, format!("unknown band {id}"));
    let band_id: usize = id.parse().map_err(|_| not_found())?;
    let stack = state
        .lock()
        .stack
        .as_ref()
        .map(|s| Arc::clone(&s.stack))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no stack loaded"))?;
    let band = stack.band_by_id(band_id).map_err(|_| not_found())?;
    let img = downsample(
        stack.width(),
        stack.height(),
        band.samples(),
        BitDepth::Eight,
        factor,
    );
    let png = encode_png(&Raster::Gray(img))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn put_annotations(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let text = std::str::from_utf8(&body)
        .map_err(|_| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "body is not UTF-8"))?;
    let (training, warnings) = TrainingSet::parse(text)?;
    let mut s = state.lock();
    if let Some(stack) = &s.stack {
        pipeline::check_annotation_crop(&training, stack.crop)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    }
    let reply = json!({
        "counts": counts(&training),
        "warnings": warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
    });
    s.training = Some(training);
    s.version += 1;
    let mut reply = reply;
    reply["version"] = json!(s.version);
    Ok(Json(reply))
}

async fn get_annotations(State(state): State<AppState>) -> ApiResult<Response> {
    let s = state.lock();
    let training = s
        .training
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no annotations"))?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::ETAG, format!("\"{}\"", s.version)),
        ],
        training.to_text(),
    )
        .into_response())
}

async fn post_run(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: RunRequest = parse_json(&body)?;
    let mut s = state.lock();
    let stack = s
        .stack
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no stack loaded"))?;
    if req.method.is_supervised() && s.training.as_ref().map_or(true, |t| t.is_empty()) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("method {} needs annotations", req.method.name()),
        ));
    }
    let run_id = format!("run-{:04}", s.runs.len() + 1);
    let config = run_config(&req, &stack, state.out_dir.join(&run_id), &run_id);
    config.validate()?;
    let input = s.snapshot_input(&stack);
    s.runs.push(RunRecord {
        run_id: run_id.clone(),
        method: req.method,
        k: req.k,
        render: crate::session::RenderSummary {
            modes: config.render.modes.clone(),
            depths: config.render.depths.clone(),
            tails: config.render.tails,
            composites: config.composites.clone(),
        },
        status: RunStatus::Queued,
        artifacts: Vec::new(),
        preview: None,
        model: None,
        report: None,
        evaluation_error: None,
        error: None,
        warnings: Vec::new(),
    });
    // queued under the lock so queue order equals history order
    state
        .queue
        .send(Job {
            run_id: run_id.clone(),
            input,
            config,
        })
        .map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "run worker stopped"))?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id }))).into_response())
}

fn artifact_url(run_id: &str, name: &str) -> String {
    format!("/api/runs/{run_id}/artifact/{name}")
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = state.lock();
    let r = s
        .run(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown run {id}")))?;
    let mut body = serde_json::to_value(r).expect("record serializes");
    body["links"] = json!({
        "preview": r.preview.as_deref().map(|p| artifact_url(&r.run_id, p)),
        "model": r.model.as_deref().map(|p| artifact_url(&r.run_id, p)),
        "artifacts": r.artifacts.iter().map(|a| json!({
            "name": a,
            "url": artifact_url(&r.run_id, a),
        })).collect::<Vec<_>>(),
    });
    Ok(Json(body))
}

fn content_type(name: &str) -> &'static str {
    match name.rsplit('.').next() {
        Some("png") => "image/png",
        Some("tif") | Some("tiff") => "image/tiff",
        Some("json") => "application/json",
        Some("csv") => "text/csv; charset=utf-8",
        _ => "text/plain; charset=utf-8",
    }
}

async fn get_artifact(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> ApiResult<Response> {
    let known = state
        .lock()
        .run(&id)
        .is_some_and(|r| r.artifacts.iter().any(|a| a == &name));
    if !known {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("run {id} has no artifact '{name}'"),
        ));
    }
    let path = state.out_dir.join(&id).join(&name);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, content_type(&name))], bytes).into_response())
}
