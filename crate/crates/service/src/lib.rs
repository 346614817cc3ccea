//! HTTP/JSON backend for the web annotator.
//!
//! Reads never block on the log; writes are serialized through one lock
//! and reach the disk before they become visible to readers.

mod store;

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;
use zoner_core::agreement::{agreement_report, pairwise_kappas, AgreementError, AnnotationRecord};
use zoner_core::corpus::Corpus;
use zoner_core::guidelines::guidelines;
use zoner_core::Zone;

pub use store::{AnnotationStore, RecordKey, StoreError};

pub const ANNOTATOR_HEADER: &str = "x-annotator";

pub struct AppState {
    corpus: Corpus,
    store: RwLock<AnnotationStore>,
}

impl AppState {
    pub fn new(corpus: Corpus, store: AnnotationStore) -> Arc<Self> {
        Arc::new(AppState {
            corpus,
            store: RwLock::new(store),
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    /// Live records, sorted.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.store.read().expect("store lock").records().cloned().collect()
    }

    pub fn export_jsonl(&self) -> String {
        self.store.read().expect("store lock").export_jsonl()
    }
}

/// All API routes, plus `static_dir` (the built UI) under `/` when given.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/docs", get(list_documents))
        .route("/api/docs/{id}", get(get_document))
        .route("/api/docs/{id}/labels", post(submit_label))
        .route("/api/agreement", get(pairwise_agreement))
        .route("/api/agreement/fleiss", get(fleiss_agreement))
        .route("/api/guidelines", get(get_guidelines))
        .route("/api/export", get(export))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    current: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
            current: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let Some(current) = self.current {
            body["current"] = current;
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Conflict { ref current, .. } => ApiError {
                current: Some(serde_json::to_value(current).expect("records serialize")),
                ..ApiError::new(StatusCode::CONFLICT, "conflict", e.to_string())
            },
            StoreError::NoAnnotator => ApiError::new(StatusCode::BAD_REQUEST, "missing_annotator", e.to_string()),
            StoreError::Io { .. } | StoreError::Parse { .. } => {
                log::error!("{e}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
            }
        }
    }
}

fn annotator(headers: &HeaderMap) -> Option<String> {
    headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub source: String,
    pub n_sentences: usize,
    pub n_labeled: usize,
}

async fn list_documents(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Json<Vec<DocumentSummary>> {
    let who = annotator(&headers).unwrap_or_default();
    let store = state.store.read().expect("store lock");
    Json(
        state
            .corpus
            .obituaries()
            .iter()
            .map(|d| DocumentSummary {
                doc_id: d.id.clone(),
                source: d.source.clone(),
                n_sentences: d.sentences.len(),
                n_labeled: store.labeled_count(&d.id, &who),
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceView {
    pub index: usize,
    pub text: String,
    /// The requesting annotator's live label, if any.
    pub label: Option<Zone>,
    /// 0 when unlabeled.
    pub rev: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentView {
    pub doc_id: String,
    pub source: String,
    pub sentences: Vec<SentenceView>,
}

async fn get_document(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<DocumentView>, ApiError> {
    let doc = state
        .corpus
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no document {id:?}")))?;
    let who = annotator(&headers).unwrap_or_default();
    let store = state.store.read().expect("store lock");
    let sentences = doc
        .sentences
        .iter()
        .map(|s| {
            let live = store.get(&doc.id, s.index, &who);
            SentenceView {
                index: s.index,
                text: s.text.clone(),
                label: live.map(|r| r.label),
                rev: live.map_or(0, |r| r.rev),
            }
        })
        .collect();
    Ok(Json(DocumentView {
        doc_id: doc.id.clone(),
        source: doc.source.clone(),
        sentences,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRequest {
    pub sentence_idx: usize,
    pub label: String,
    pub rev: u64,
}

async fn submit_label(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<LabelRequest>,
) -> Result<Json<AnnotationRecord>, ApiError> {
    let who = annotator(&headers).ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "missing_annotator",
            "the X-Annotator header is required",
        )
    })?;
    let doc = state
        .corpus
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no document {id:?}")))?;
    if req.sentence_idx >= doc.sentences.len() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("document {id:?} has no sentence {}", req.sentence_idx),
        ));
    }
    let label = Zone::from_code(&req.label)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "label_error", e.to_string()))?;
    let state = Arc::clone(&state);
    let record = tokio::task::spawn_blocking(move || {
        state
            .store
            .write()
            .expect("store lock")
            .submit(&id, req.sentence_idx, &who, label, req.rev)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(record))
}

#[derive(Debug, Deserialize)]
struct AgreementQuery {
    annotators: Option<String>,
}

impl AgreementQuery {
    fn annotators(&self) -> Option<Vec<String>> {
        let list: Vec<String> = self
            .annotators
            .as_deref()?
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        (!list.is_empty()).then_some(list)
    }
}

fn records_of(state: &AppState, annotators: Option<&[String]>) -> Vec<AnnotationRecord> {
    state
        .records()
        .into_iter()
        .filter(|r| annotators.is_none_or(|list| list.contains(&r.annotator)))
        .collect()
}

fn insufficient(annotators: Option<&[String]>) -> Json<Value> {
    Json(json!({
        "status": "insufficient_overlap",
        "reason": AgreementError::InsufficientOverlap.to_string(),
        "annotators": annotators,
    }))
}

async fn pairwise_agreement(State(state): State<Arc<AppState>>, Query(q): Query<AgreementQuery>) -> Json<Value> {
    let wanted = q.annotators();
    let records = records_of(&state, wanted.as_deref());
    let pairwise = pairwise_kappas(&records, wanted.as_deref());
    if !pairwise.iter().any(|p| p.items > 0) {
        return insufficient(wanted.as_deref());
    }
    Json(json!({ "status": "ok", "pairwise": pairwise }))
}

async fn fleiss_agreement(
    State(state): State<Arc<AppState>>,
    Query(q): Query<AgreementQuery>,
) -> Result<Json<Value>, ApiError> {
    let wanted = q.annotators();
    let records = records_of(&state, wanted.as_deref());
    match agreement_report(&records, Some(&state.corpus)) {
        Ok(report) => {
            let mut body = serde_json::to_value(&report).expect("reports serialize");
            body["status"] = json!("ok");
            Ok(Json(body))
        }
        Err(AgreementError::InsufficientOverlap) => Ok(insufficient(wanted.as_deref())),
        Err(e) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "agreement",
            e.to_string(),
        )),
    }
}

async fn get_guidelines() -> impl IntoResponse {
    Json(guidelines())
}

async fn export(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], state.export_jsonl())
}

/// Serve `router` on `listener` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
