use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hkg_core::analytics::{self, EventKind, InteractionEvent, SessionMetrics};
use hkg_core::hkg::{self, FocusView, GraphError, KnowledgeGraph};
use hkg_core::store::{self, StoreError};

use crate::state::{AppState, GraphEntry};

type Shared = Arc<AppState>;

#[derive(Debug)]
pub(crate) struct ApiError {
    status: StatusCode,
    code: &'static str,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str) -> Self {
        ApiError { status, code }
    }

    fn not_found(code: &'static str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, code)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code }))).into_response()
    }
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        log::debug!("{e}");
        match e {
            GraphError::UnknownDocument(_) => ApiError::not_found("unknown_document"),
            GraphError::UnknownNode(_) => ApiError::not_found("unknown_node"),
            GraphError::NotVisible(_) => ApiError::new(StatusCode::CONFLICT, "not_visible"),
            GraphError::InvalidParams(_) | GraphError::Invalid(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        log::debug!("rejected body: {e}");
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request")
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/graphs", get(list_graphs))
        .route("/api/graphs/{g}/collection", get(collection))
        .route("/api/graphs/{g}/documents/{d}/minimap", get(minimap))
        .route("/api/graphs/{g}/documents/{d}/detail", get(detail))
        .route("/api/graphs/{g}/documents/{d}/expand", post(expand))
        .route("/api/graphs/{g}/edges/{e}/relations", get(relations))
        .route("/api/documents/{d}/text", get(document_text))
        .route("/api/sessions", post(create_session))
        .route("/api/events", post(post_event))
        .route("/api/sessions/{s}/metrics", get(metrics))
        .with_state(state)
}

fn graph<'a>(state: &'a AppState, id: &str) -> Result<&'a GraphEntry, ApiError> {
    state
        .graphs
        .get(id)
        .ok_or_else(|| ApiError::not_found("unknown_graph"))
}

async fn list_graphs(State(state): State<Shared>) -> Json<Value> {
    let graphs: Vec<Value> = state
        .graphs
        .values()
        .map(|g| {
            json!({
                "id": g.id,
                "content_hash": g.content_hash,
                "report": g.report,
            })
        })
        .collect();
    Json(json!({ "graphs": graphs }))
}

async fn collection(State(state): State<Shared>, Path(g): Path<String>) -> ApiResult<Value> {
    let entry = graph(&state, &g)?;
    Ok(Json(json!({ "partitions": entry.hkg.collection })))
}

async fn minimap(
    State(state): State<Shared>,
    Path((g, d)): Path<(String, String)>,
) -> ApiResult<Value> {
    let entry = graph(&state, &g)?;
    let concepts = entry.hkg.minimap(&d)?;
    Ok(Json(json!({ "doc_id": d, "central_concepts": concepts })))
}

#[derive(Debug, Deserialize)]
struct DetailQuery {
    #[serde(default)]
    visible_only: bool,
    session: Option<String>,
    focus: Option<String>,
}

#[derive(Debug, Serialize)]
struct DetailNode {
    id: String,
    label: String,
    degree: usize,
    frequency: u64,
    central: bool,
    visible: bool,
}

#[derive(Debug, Serialize)]
struct DetailEdge {
    id: usize,
    source: String,
    target: String,
    relations: usize,
}

#[derive(Debug, Serialize)]
struct DetailResponse {
    doc_id: String,
    nodes: Vec<DetailNode>,
    edges: Vec<DetailEdge>,
    #[serde(skip_serializing_if = "Option::is_none")]
    focus: Option<FocusView>,
}

/// Visible set for a document: the session's current one if it has
/// clicked there before, otherwise the initial one.
fn current_visible(
    state: &AppState,
    entry: &GraphEntry,
    doc: &str,
    session: Option<&str>,
) -> Result<BTreeSet<String>, ApiError> {
    if let Some(sid) = session {
        let s = state
            .session(sid)
            .ok_or_else(|| ApiError::not_found("unknown_session"))?;
        let s = s.lock().expect("session poisoned");
        if s.graph_id != entry.id {
            return Err(ApiError::new(StatusCode::CONFLICT, "graph_mismatch"));
        }
        if let Some(v) = s.visible.get(doc) {
            return Ok(v.clone());
        }
    }
    Ok(entry.hkg.initial_visible(doc, state.hide_threshold)?)
}

async fn detail(
    State(state): State<Shared>,
    Path((g, d)): Path<(String, String)>,
    Query(q): Query<DetailQuery>,
) -> ApiResult<DetailResponse> {
    let entry = graph(&state, &g)?;
    let sub = hkg::document_subgraph(&entry.hkg.detail, &d)?;
    let visible = current_visible(&state, entry, &d, q.session.as_deref())?;
    let central: BTreeSet<&str> = entry.hkg.minimap(&d)?.iter().map(|c| c.entity.as_str()).collect();
    let focus = q.focus.as_deref().map(|f| hkg::focus_filter(&sub, f)).transpose()?;

    let nodes = sub
        .nodes
        .values()
        .filter(|n| !q.visible_only || visible.contains(&n.entity))
        .map(|n| DetailNode {
            id: n.entity.clone(),
            label: n.label.clone(),
            degree: n.degree,
            frequency: sub.frequency(&n.entity, &d),
            central: central.contains(n.entity.as_str()),
            visible: visible.contains(&n.entity),
        })
        .collect();
    let edges = sub
        .edges
        .iter()
        .filter(|e| {
            !q.visible_only || (visible.contains(&e.endpoints.0) && visible.contains(&e.endpoints.1))
        })
        .map(|e| DetailEdge {
            id: entry
                .hkg
                .detail
                .edge_id(&e.endpoints.0, &e.endpoints.1)
                .expect("subgraph edges exist in the detail graph"),
            source: e.endpoints.0.clone(),
            target: e.endpoints.1.clone(),
            relations: e.relations.len(),
        })
        .collect();
    Ok(Json(DetailResponse {
        doc_id: d,
        nodes,
        edges,
        focus,
    }))
}

#[derive(Debug, Deserialize)]
struct ExpandRequest {
    session: String,
    node: String,
}

fn subgraph(entry: &GraphEntry, doc: &str) -> Result<KnowledgeGraph, ApiError> {
    Ok(hkg::document_subgraph(&entry.hkg.detail, doc)?)
}

async fn expand(
    State(state): State<Shared>,
    Path((g, d)): Path<(String, String)>,
    body: Result<Json<ExpandRequest>, JsonRejection>,
) -> ApiResult<Value> {
    let Json(req) = body?;
    let entry = graph(&state, &g)?;
    let sub = subgraph(entry, &d)?;
    let session = state
        .session(&req.session)
        .ok_or_else(|| ApiError::not_found("unknown_session"))?;
    let mut s = session.lock().expect("session poisoned");
    if s.graph_id != entry.id {
        return Err(ApiError::new(StatusCode::CONFLICT, "graph_mismatch"));
    }
    let visible = match s.visible.get(&d) {
        Some(v) => v.clone(),
        None => entry.hkg.initial_visible(&d, state.hide_threshold)?,
    };
    let next = hkg::expand_state(&sub, &visible, &req.node)?;
    s.visible.insert(d.clone(), next.clone());
    Ok(Json(json!({ "doc_id": d, "node": req.node, "visible": next })))
}

async fn relations(
    State(state): State<Shared>,
    Path((g, e)): Path<(String, usize)>,
) -> ApiResult<Value> {
    let entry = graph(&state, &g)?;
    let edge = entry
        .hkg
        .detail
        .edges
        .get(e)
        .ok_or_else(|| ApiError::not_found("unknown_edge"))?;
    let relations: Vec<Value> = edge
        .relations
        .iter()
        .map(|r| {
            let doc = entry.hkg.document(&r.anchor.doc_id);
            json!({
                "relation": r.relation,
                "snippet": r.snippet,
                "anchor": r.anchor,
                "salience": r.salience,
                "title": doc.map(|d| d.title.as_str()),
                "url": doc.map(|d| d.url.as_str()),
            })
        })
        .collect();
    Ok(Json(json!({
        "edge_id": e,
        "endpoints": [edge.endpoints.0, edge.endpoints.1],
        "relations": relations,
    })))
}

async fn document_text(State(state): State<Shared>, Path(d): Path<String>) -> ApiResult<Value> {
    let doc = state
        .document_body(&d)
        .ok_or_else(|| ApiError::not_found("unknown_document"))?;
    Ok(Json(json!({
        "doc_id": doc.doc_id,
        "title": doc.title,
        "url": doc.source_url,
        "body": doc.body,
    })))
}

#[derive(Debug, Default, Deserialize)]
struct SessionRequest {
    graph: Option<String>,
}

async fn create_session(
    State(state): State<Shared>,
    body: Option<Json<SessionRequest>>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    let graph_id = match req.graph {
        Some(g) => graph(&state, &g)?.id.clone(),
        None => state.default_graph().to_string(),
    };
    let session_id = state.create_session(&graph_id);
    log::info!("session {session_id} opened on graph `{graph_id}`");
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": session_id, "graph_id": graph_id })),
    ))
}

async fn post_event(
    State(state): State<Shared>,
    body: Result<Json<InteractionEvent>, JsonRejection>,
) -> Result<StatusCode, ApiError> {
    let Json(event) = body?;
    if state.session(&event.session).is_none() {
        return Err(ApiError::not_found("unknown_session"));
    }
    let mut log = state.log.lock().expect("event log poisoned");
    match log.append(&event) {
        Ok(()) => Ok(StatusCode::NO_CONTENT),
        Err(StoreError::OutOfOrder { .. }) => Err(ApiError::new(StatusCode::CONFLICT, "out_of_order")),
        Err(StoreError::Event { reason, .. }) => {
            log::debug!("rejected event: {reason}");
            Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_event"))
        }
        Err(e) => {
            log::error!("event log write failed: {e}");
            Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal"))
        }
    }
}

#[derive(Debug, Serialize)]
struct MetricsResponse {
    /// False while the session has not logged TaskEnd; the metrics then
    /// cover the task up to its latest event.
    complete: bool,
    #[serde(flatten)]
    metrics: SessionMetrics,
}

async fn metrics(State(state): State<Shared>, Path(s): Path<String>) -> ApiResult<MetricsResponse> {
    let events = {
        let log = state.log.lock().expect("event log poisoned");
        store::read_events(log.path()).map_err(|e| {
            log::error!("event log read failed: {e}");
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal")
        })?
    };
    let mut mine: Vec<InteractionEvent> = events.into_iter().filter(|e| e.session == s).collect();
    if mine.is_empty() {
        return Err(ApiError::not_found("unknown_session"));
    }
    let complete = mine.iter().any(|e| e.kind == EventKind::TaskEnd);
    if !complete {
        let last = mine.last().map_or(0, |e| e.t_ms);
        mine.push(InteractionEvent::new(s.clone(), last, EventKind::TaskEnd));
    }
    let metrics = analytics::session_metrics(&mine).map_err(|e| {
        log::debug!("metrics for {s}: {e}");
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "incomplete_session")
    })?;
    Ok(Json(MetricsResponse { complete, metrics }))
}
