//! HTTP + JSON facade over the workbench engine.
//!
//! Content mutations (reorder, column writes, editor commits) are versioned:
//! the client sends the version it last saw in an `If-Match` header and gets
//! `409 VersionConflict` if another writer got there first. View toggles and
//! editor probability/lock calls are per-session and unversioned.

pub mod error;
pub mod registry;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cptwb_core::elicit::{LabelMode, DEFAULT_VALIDATION_TOLERANCE};
use cptwb_core::{ColumnStatus, PrefixContext};

pub use error::ApiError;
pub use registry::{EditorView, Mutation, Registry, Version};

pub type AppState = Arc<Registry>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/networks", post(load_network))
        .route("/api/networks/{id}", get(get_network))
        .route("/api/networks/{id}/validation", get(get_validation))
        .route("/api/networks/{id}/nodes/{node}/tree", get(get_tree))
        .route("/api/networks/{id}/nodes/{node}/tree/toggle", post(toggle_tree))
        .route("/api/networks/{id}/nodes/{node}/table", get(get_table))
        .route("/api/networks/{id}/nodes/{node}/table/toggle", post(toggle_table))
        .route("/api/networks/{id}/nodes/{node}/reorder", post(reorder))
        .route("/api/networks/{id}/nodes/{node}/columns", post(set_columns))
        .route("/api/networks/{id}/nodes/{node}/editors", post(begin_editor))
        .route("/api/editors/{eid}", get(get_editor))
        .route("/api/editors/{eid}/probability", post(set_probability))
        .route("/api/editors/{eid}/lock", post(toggle_lock))
        .route("/api/editors/{eid}/commit", post(commit))
        .with_state(state)
}

/// Serves the API until the process is stopped.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(Registry::new()))).await
}

fn parse_body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Reads the expected version from `If-Match` (`3`, `"3"` or `W/"3"`).
fn expected_version(headers: &HeaderMap) -> Result<Version, ApiError> {
    let raw = headers.get(header::IF_MATCH).ok_or_else(|| {
        ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "PreconditionRequired",
            "versioned mutation needs an If-Match header",
        )
    })?;
    let text = raw
        .to_str()
        .map_err(|_| ApiError::bad_request("If-Match is not ASCII"))?
        .trim();
    let text = text.strip_prefix("W/").unwrap_or(text).trim_matches('"');
    text.parse()
        .map_err(|_| ApiError::bad_request(format!("If-Match `{text}` is not a version number")))
}

fn etag(version: Version) -> (header::HeaderName, HeaderValue) {
    (
        header::ETAG,
        HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are valid header text"),
    )
}

#[derive(Serialize)]
struct Loaded {
    id: String,
    version: Version,
}

#[derive(Serialize)]
struct VersionBody {
    version: Version,
}

fn versioned(version: Version) -> Response {
    ([etag(version)], Json(VersionBody { version })).into_response()
}

async fn load_network(State(reg): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let (id, version) = reg.load(&body)?;
    Ok((StatusCode::CREATED, [etag(version)], Json(Loaded { id, version })).into_response())
}

async fn get_network(State(reg): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (doc, version) = reg.document(&id)?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
            etag(version),
        ],
        doc,
    )
        .into_response())
}

#[derive(Deserialize)]
struct TolQuery {
    tol: Option<f64>,
}

async fn get_validation(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TolQuery>,
) -> Result<Response, ApiError> {
    let tol = q.tol.unwrap_or(DEFAULT_VALIDATION_TOLERANCE);
    if tol.is_nan() || tol <= 0.0 {
        return Err(ApiError::bad_request("tol must be positive"));
    }
    Ok(Json(reg.validation(&id, tol)?).into_response())
}

#[derive(Deserialize)]
struct ClientQuery {
    client: Option<String>,
}

impl ClientQuery {
    fn client(&self) -> &str {
        self.client.as_deref().unwrap_or("default")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToggleBody {
    context: PrefixContext,
}

async fn get_tree(
    State(reg): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    Query(q): Query<ClientQuery>,
) -> Result<Response, ApiError> {
    Ok(Json(reg.tree(&id, q.client(), &node)?).into_response())
}

async fn toggle_tree(
    State(reg): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    Query(q): Query<ClientQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let b: ToggleBody = parse_body(&body)?;
    Ok(Json(reg.toggle_tree(&id, q.client(), &node, &b.context)?).into_response())
}

async fn get_table(
    State(reg): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    Query(q): Query<ClientQuery>,
) -> Result<Response, ApiError> {
    Ok(Json(reg.table(&id, q.client(), &node)?).into_response())
}

async fn toggle_table(
    State(reg): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    Query(q): Query<ClientQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let b: ToggleBody = parse_body(&body)?;
    Ok(Json(reg.toggle_table(&id, q.client(), &node, &b.context)?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReorderBody {
    permutation: Vec<usize>,
}

async fn reorder(
    State(reg): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_version(&headers)?;
    let b: ReorderBody = parse_body(&body)?;
    let version = reg.apply(
        &id,
        Mutation::Reorder {
            node,
            permutation: b.permutation,
        },
        expected,
    )?;
    Ok(versioned(version))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnsBody {
    columns: Vec<usize>,
    distribution: Vec<f64>,
    status: Option<ColumnStatus>,
}

async fn set_columns(
    State(reg): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_version(&headers)?;
    let b: ColumnsBody = parse_body(&body)?;
    let version = reg.apply(
        &id,
        Mutation::SetColumns {
            node,
            columns: b.columns,
            distribution: b.distribution,
            status: b.status.unwrap_or(ColumnStatus::Elicited),
        },
        expected,
    )?;
    Ok(versioned(version))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ModeQuery {
    label_mode: Option<LabelMode>,
}

impl ModeQuery {
    fn mode(&self) -> LabelMode {
        self.label_mode.unwrap_or_default()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditorBody {
    selection: Vec<PrefixContext>,
}

async fn begin_editor(
    State(reg): State<AppState>,
    Path((id, node)): Path<(String, String)>,
    Query(q): Query<ModeQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let b: EditorBody = parse_body(&body)?;
    let view = reg.begin_editor(&id, &node, b.selection, q.mode())?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_editor(
    State(reg): State<AppState>,
    Path(eid): Path<String>,
    Query(q): Query<ModeQuery>,
) -> Result<Response, ApiError> {
    Ok(Json(reg.editor(&eid, q.mode())?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbabilityBody {
    outcome: usize,
    target: f64,
}

async fn set_probability(
    State(reg): State<AppState>,
    Path(eid): Path<String>,
    Query(q): Query<ModeQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let b: ProbabilityBody = parse_body(&body)?;
    Ok(Json(reg.set_probability(&eid, b.outcome, b.target, q.mode())?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LockBody {
    outcome: usize,
}

async fn toggle_lock(
    State(reg): State<AppState>,
    Path(eid): Path<String>,
    Query(q): Query<ModeQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let b: LockBody = parse_body(&body)?;
    Ok(Json(reg.toggle_lock(&eid, b.outcome, q.mode())?).into_response())
}

async fn commit(
    State(reg): State<AppState>,
    Path(eid): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let expected = expected_version(&headers)?;
    Ok(versioned(reg.commit_editor(&eid, expected)?))
}
