//! HTTP service over an [`Archive`]. Handlers parse parameters, call exactly
//! one archive method on the blocking pool and serialize its result.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::response::{Html, IntoResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use shotgraph_core::feature_store::parse_vectors;
use shotgraph_core::retrieval::{DEFAULT_PRUNE_DEPTH, DEFAULT_SIMILARITY_THRESHOLD};
use shotgraph_core::{Archive, ClassMap, IndexParams, Metric, NodeId, Page, PoolMode, SegmentOptions, TrainParams};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::error::{ApiError, ErrorCode};

/// Feature streams for long films are large.
const BODY_LIMIT: usize = 1 << 30;

const UI_PLACEHOLDER: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>shotgraph</title></head>
<body><h1>shotgraph</h1>
<p>No UI bundle configured. Start the service with <code>serve --ui DIR</code> to serve one here.</p>
</body></html>
";

#[derive(Clone)]
pub struct AppState {
    pub archive: Arc<Archive>,
    pub ui_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(archive: Arc<Archive>) -> Self {
        Self { archive, ui_dir: None }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Archive) -> Result<T, ApiError> + Send + 'static,
{
    let archive = state.archive.clone();
    tokio::task::spawn_blocking(move || f(&archive))
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn params<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(t)| t).map_err(|e| ApiError::invalid(e.body_text()))
}

fn shot_id(raw: &str) -> Result<NodeId, ApiError> {
    raw.parse()
        .map(NodeId)
        .map_err(|_| ApiError::invalid(format!("shot id must be a non-negative integer, got {raw:?}")))
}

fn utf8(body: Bytes) -> Result<String, ApiError> {
    String::from_utf8(body.to_vec()).map_err(|e| ApiError::new(ErrorCode::BadFormat, format!("body is not UTF-8: {e}")))
}

/// Accepts `1`/`0` as well as `true`/`false`.
fn flag<'de, D: serde::Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" | "" => Ok(false),
        other => Err(serde::de::Error::custom(format!("expected 0 or 1, got {other:?}"))),
    }
}

pub fn router(state: AppState) -> Router {
    let ui = state.ui_dir.clone();
    let app = Router::new()
        .route("/health", get(health))
        .route("/films", post(ingest))
        .route("/films/{id}/segment", post(segment))
        .route("/films/{id}/index", post(index))
        .route("/search", get(search))
        .route("/search/spatial", get(search_spatial))
        .route("/shots/{id}", get(shot))
        .route("/shots/{id}/similar", get(similar))
        .route("/classifiers", post(train))
        .route("/classifiers/{id}/results", get(classifier_results))
        .route("/query", post(query));
    let app = match ui {
        Some(dir) => app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true)),
        None => app
            .route("/ui", get(|| async { Html(UI_PLACEHOLDER) }))
            .route("/ui/", get(|| async { Html(UI_PLACEHOLDER) })),
    };
    app.fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

/// Bind and serve until interrupted.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct IngestParams {
    #[serde(deserialize_with = "flag")]
    overwrite: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IngestResponse {
    pub film: shotgraph_core::FilmMeta,
    pub frames: usize,
}

async fn ingest(
    State(state): State<AppState>,
    q: Result<Query<IngestParams>, QueryRejection>,
    body: Bytes,
) -> ApiResult<IngestResponse> {
    let p = params(q)?;
    let res = blocking(&state, move |a| {
        let (film, frames) = a.ingest(body.as_ref(), p.overwrite)?;
        Ok(IngestResponse { film, frames })
    })
    .await?;
    Ok(Json(res))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct SegmentParams {
    threshold: Option<f64>,
    metric: Option<String>,
}

async fn segment(
    State(state): State<AppState>,
    Path(film): Path<String>,
    q: Result<Query<SegmentParams>, QueryRejection>,
) -> ApiResult<shotgraph_core::SegmentReport> {
    let p = params(q)?;
    let metric = match p.metric.as_deref() {
        Some(m) => m.parse::<Metric>().map_err(ApiError::invalid)?,
        None => Metric::default(),
    };
    let options = SegmentOptions {
        threshold: p.threshold,
        metric,
    };
    Ok(Json(blocking(&state, move |a| Ok(a.segment(&film, options)?)).await?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct IndexQuery {
    mode: Option<String>,
    min_weight: Option<f64>,
}

/// The optional body is a class map, one synset id per line.
async fn index(
    State(state): State<AppState>,
    Path(film): Path<String>,
    q: Result<Query<IndexQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<shotgraph_core::BuildCounts> {
    let p = params(q)?;
    let defaults = IndexParams::default();
    let mode = match p.mode.as_deref() {
        Some(m) => m.parse::<PoolMode>()?,
        None => defaults.mode,
    };
    let params = IndexParams {
        mode,
        min_weight: p.min_weight.unwrap_or(defaults.min_weight),
    };
    let text = utf8(body)?;
    let map = if text.trim().is_empty() {
        None
    } else {
        Some(ClassMap::parse(text.as_bytes())?)
    };
    Ok(Json(blocking(&state, move |a| Ok(a.index(&film, params, map)?)).await?))
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    q: String,
    #[serde(default, deserialize_with = "flag")]
    hypernym: bool,
    min_weight: Option<f64>,
    #[serde(default)]
    skip: usize,
    limit: Option<usize>,
}

async fn search(
    State(state): State<AppState>,
    q: Result<Query<SearchParams>, QueryRejection>,
) -> ApiResult<shotgraph_core::SearchResponse> {
    let p = params(q)?;
    let min_weight = p.min_weight.unwrap_or(shotgraph_core::indexer::DEFAULT_MIN_WEIGHT);
    let page = Page {
        skip: p.skip,
        limit: p.limit,
    };
    let res = blocking(&state, move |a| {
        Ok(if p.hypernym {
            a.search_hypernym(&p.q, min_weight, page)?
        } else {
            a.search_keyword(&p.q, min_weight, page)?
        })
    })
    .await?;
    Ok(Json(res))
}

#[derive(Debug, Deserialize)]
struct SpatialParams {
    a: String,
    rel: String,
    b: String,
    #[serde(default)]
    skip: usize,
    limit: Option<usize>,
}

async fn search_spatial(
    State(state): State<AppState>,
    q: Result<Query<SpatialParams>, QueryRejection>,
) -> ApiResult<shotgraph_core::SearchResponse> {
    let p = params(q)?;
    let rel = p.rel.parse()?;
    let page = Page {
        skip: p.skip,
        limit: p.limit,
    };
    Ok(Json(blocking(&state, move |a| Ok(a.search_spatial(&p.a, rel, &p.b, page)?)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultList {
    pub results: Vec<shotgraph_core::SearchResult>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct SimilarParams {
    threshold: Option<f64>,
    depth: Option<usize>,
}

async fn similar(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<SimilarParams>, QueryRejection>,
) -> ApiResult<ResultList> {
    let id = shot_id(&id)?;
    let p = params(q)?;
    let threshold = p.threshold.unwrap_or(DEFAULT_SIMILARITY_THRESHOLD);
    let depth = p.depth.unwrap_or(DEFAULT_PRUNE_DEPTH);
    let results = blocking(&state, move |a| Ok(a.similar(id, threshold, depth)?)).await?;
    Ok(Json(ResultList { results }))
}

async fn shot(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<shotgraph_core::ShotInfo> {
    let id = shot_id(&id)?;
    Ok(Json(blocking(&state, move |a| Ok(a.shot_info(id)?)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainResponse {
    pub classifier_id: String,
    pub positives: usize,
    pub negatives: usize,
    pub epoch_losses: Vec<f64>,
}

/// Body: one `{"fv": [...]}` object per line. Training parameters come from
/// the query string.
async fn train(
    State(state): State<AppState>,
    q: Result<Query<TrainParams>, QueryRejection>,
    body: Bytes,
) -> ApiResult<TrainResponse> {
    let params = params(q)?;
    let res = blocking(&state, move |a| {
        let positives = parse_vectors(body.as_ref(), None)?;
        let (id, model) = a.train_classifier(&positives, &params)?;
        Ok(TrainResponse {
            classifier_id: id,
            positives: model.positives,
            negatives: model.negatives,
            epoch_losses: model.epoch_losses.clone(),
        })
    })
    .await?;
    Ok(Json(res))
}

async fn classifier_results(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<ResultList> {
    let results = blocking(&state, move |a| Ok(a.classifier_results(&id)?)).await?;
    Ok(Json(ResultList { results }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct QueryParams {
    #[serde(deserialize_with = "flag")]
    explain: bool,
}

/// Body: raw query text. `?explain=1` returns the plan instead of rows.
async fn query(
    State(state): State<AppState>,
    q: Result<Query<QueryParams>, QueryRejection>,
    body: Bytes,
) -> Result<axum::response::Response, ApiError> {
    let p = params(q)?;
    let text = utf8(body)?;
    if p.explain {
        let plan = blocking(&state, move |a| Ok(a.explain(&text)?.to_string())).await?;
        Ok(Json(json!({ "plan": plan })).into_response())
    } else {
        Ok(Json(blocking(&state, move |a| Ok(a.query(&text)?)).await?).into_response())
    }
}
