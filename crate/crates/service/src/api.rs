use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dragkit_core::HarnessConfig;
use dragkit_formats::bundle::{ArtifactKind, BundleSummary, PairSummary, TraceSummary, SUMMARY_FILE};
use dragkit_formats::raster::peek_dims;
use dragkit_formats::{compute_edit, media_type, sha256_hex, ComputeOptions, DragSpecFile, FormatError, Raster};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::config::ServiceConfig;
use crate::store::Store;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: Store,
    max_image_area: usize,
    harness: HarnessConfig,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(cfg: &ServiceConfig) -> std::io::Result<Self> {
        Ok(Self {
            inner: Arc::new(Inner {
                store: Store::open(&cfg.data_dir)?,
                max_image_area: cfg.max_image_area,
                harness: cfg.harness.clone(),
                locks: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    fn session_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.inner.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.to_string(), message: message.into() }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("{what} not found"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
    }
}

impl From<FormatError> for ApiError {
    fn from(e: FormatError) -> Self {
        let status = if e.is_user_error() { StatusCode::UNPROCESSABLE_ENTITY } else { StatusCode::INTERNAL_SERVER_ERROR };
        Self::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

pub fn router(state: AppState, cfg: &ServiceConfig) -> Router {
    let origins = if cfg.cors_origins.is_empty() {
        AllowOrigin::from(Any)
    } else {
        AllowOrigin::list(cfg.cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    let cors = CorsLayer::new()
        .allow_origin(origins)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE, header::IF_NONE_MATCH])
        .expose_headers([header::ETAG]);
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/edit", post(edit))
        .route("/sessions/{id}/artifacts/{kind}", get(artifact))
        .layer(DefaultBodyLimit::max(cfg.body_limit))
        .layer(cors)
        .with_state(state)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Serialize)]
struct Created {
    id: String,
    width: usize,
    height: usize,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let undecodable = |m: String| ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "UnsupportedImage", m);
    if body.is_empty() {
        return Err(undecodable("empty upload".into()));
    }
    let (w, h) = peek_dims(&body).map_err(|e| undecodable(e.to_string()))?;
    let limit = state.inner.max_image_area;
    if w.saturating_mul(h) > limit {
        let e = FormatError::ImageTooLarge { width: w, height: h, limit };
        return Err(ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, e.code(), e.to_string()));
    }
    let st = state.clone();
    let meta = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        Raster::decode(&body).map_err(|e| undecodable(e.to_string()))?;
        st.store().create(&body, w, h).map_err(ApiError::internal)
    })
    .await
    .map_err(ApiError::internal)??;
    Ok((StatusCode::CREATED, Json(Created { id: meta.id, width: meta.width, height: meta.height })))
}

#[derive(Debug, Default, Deserialize)]
pub struct EditParams {
    #[serde(default)]
    trace: bool,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct EditResponse {
    session: String,
    grid_width: usize,
    grid_height: usize,
    mask_src_rle: Vec<usize>,
    mask_dst_rle: Vec<usize>,
    dst_cells: usize,
    pairs: Vec<PairSummary>,
    reachability: Vec<bool>,
    field_url: String,
    artifacts: HashMap<&'static str, String>,
    trace: Option<TraceSummary>,
    summary_sha256: String,
    wall_time_ms: f64,
}

async fn edit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<EditParams>,
    body: Bytes,
) -> Result<Json<EditResponse>, ApiError> {
    if state.store().session_dir(&id).is_none() {
        return Err(ApiError::not_found("session"));
    }
    let text = std::str::from_utf8(&body).map_err(|_| FormatError::MalformedSpec("body is not UTF-8".into()))?;
    let spec = DragSpecFile::parse(text)?;

    let lock = state.session_lock(&id);
    let _guard = lock.lock().await;
    let started = Instant::now();
    let st = state.clone();
    let sid = id.clone();
    let harness = params.trace.then(|| HarnessConfig {
        seed: params.seed.unwrap_or(st.inner.harness.seed),
        ..st.inner.harness.clone()
    });
    let files = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let bytes = st.store().image(&sid).map_err(ApiError::internal)?;
        let image = Raster::decode(&bytes)?;
        let mask = spec.load_mask(None)?;
        let bundle = compute_edit(&image, &spec, &mask, &ComputeOptions { trace: harness, field_stride: 1 })?;
        let files = bundle.files();
        st.store().publish(&sid, &spec.to_json(), &files).map_err(ApiError::internal)?;
        Ok(files)
    })
    .await
    .map_err(ApiError::internal)??;
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;

    let summary_bytes = &files[SUMMARY_FILE];
    let summary: BundleSummary = serde_json::from_slice(summary_bytes).map_err(ApiError::internal)?;
    let base = format!("/sessions/{id}/artifacts");
    let artifacts = ArtifactKind::ALL
        .into_iter()
        .filter(|k| k.file_names().iter().any(|n| files.contains_key(*n)))
        .map(|k| (k.name(), format!("{base}/{}", k.name())))
        .collect();
    Ok(Json(EditResponse {
        session: id,
        grid_width: summary.grid_width,
        grid_height: summary.grid_height,
        reachability: summary.pairs.iter().map(|p| p.reachable).collect(),
        pairs: summary.pairs,
        mask_src_rle: summary.mask_src_rle,
        mask_dst_rle: summary.mask_dst_rle,
        dst_cells: summary.dst_cells,
        field_url: format!("{base}/field"),
        artifacts,
        trace: summary.trace,
        summary_sha256: sha256_hex(summary_bytes),
        wall_time_ms,
    }))
}

async fn artifact(
    State(state): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let kind = ArtifactKind::parse(&kind).ok_or_else(|| ApiError::not_found("artifact kind"))?;
    if state.store().session_dir(&id).is_none() {
        return Err(ApiError::not_found("session"));
    }
    let dir = state.store().bundle_dir(&id).ok_or_else(|| ApiError::not_found("bundle"))?;
    let path = kind.locate(&dir).ok_or_else(|| ApiError::not_found("artifact"))?;
    let bytes = match tokio::fs::read(&path).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ApiError::not_found("artifact")),
        Err(e) => return Err(ApiError::internal(e)),
    };
    let etag = format!("\"{}\"", sha256_hex(&bytes));
    let etag_value = HeaderValue::from_str(&etag).map_err(ApiError::internal)?;
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let mut resp = if matches {
        StatusCode::NOT_MODIFIED.into_response()
    } else {
        let mut r = Response::new(Body::from(bytes));
        r.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(media_type(name)));
        r
    };
    resp.headers_mut().insert(header::ETAG, etag_value);
    resp.headers_mut().insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    Ok(resp)
}
