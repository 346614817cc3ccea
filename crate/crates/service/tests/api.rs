use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;
use zoner_core::corpus::{Corpus, Obituary};
use zoner_service::{router, AnnotationStore, AppState};

fn corpus() -> Corpus {
    let doc = |id: &str, source: &str, n: usize| {
        Obituary::from_sentences(
            id,
            source,
            None,
            (0..n).map(|i| (format!("Sentence {i} of {id}."), None)),
        )
        .unwrap()
    };
    Corpus::new(vec![doc("d1", "US", 5), doc("d2", "CA", 3), doc("d3", "UK", 12)]).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    state: Arc<AppState>,
    app: Router,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let static_dir = dir.path().join("ui");
    std::fs::create_dir(&static_dir).unwrap();
    std::fs::write(static_dir.join("index.html"), "<!doctype html><title>annotator</title>").unwrap();
    std::fs::write(static_dir.join("app.js"), "console.log(1);").unwrap();
    let store = AnnotationStore::open(dir.path().join("annotations.jsonl")).unwrap();
    let state = AppState::new(corpus(), store);
    let app = router(Arc::clone(&state), Some(static_dir));
    Fixture { _dir: dir, state, app }
}

async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    annotator: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(a) = annotator {
        req = req.header("X-Annotator", a);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn call_json(
    app: &Router,
    method: &str,
    uri: &str,
    annotator: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, annotator, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn label(app: &Router, doc: &str, idx: usize, who: &str, code: &str, rev: u64) -> (StatusCode, Value) {
    call_json(
        app,
        "POST",
        &format!("/api/docs/{doc}/labels"),
        Some(who),
        Some(json!({ "sentence_idx": idx, "label": code, "rev": rev })),
    )
    .await
}

fn labeled(list: &Value, doc: &str) -> u64 {
    list.as_array().unwrap().iter().find(|d| d["doc_id"] == doc).unwrap()["n_labeled"]
        .as_u64()
        .unwrap()
}

#[tokio::test]
async fn progress_counts_follow_labels() {
    let f = fixture();
    let (status, list) = call_json(&f.app, "GET", "/api/docs", Some("ann"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 3);
    assert!(list.as_array().unwrap().iter().all(|d| d["n_labeled"] == 0));
    assert_eq!(list[0]["n_sentences"], 5);

    assert_eq!(label(&f.app, "d1", 0, "ann", "PI", 1).await.0, StatusCode::OK);
    assert_eq!(label(&f.app, "d1", 4, "ann", "FI", 1).await.0, StatusCode::OK);
    let (_, list) = call_json(&f.app, "GET", "/api/docs", Some("ann"), None).await;
    assert_eq!(labeled(&list, "d1"), 2);
    let (_, list) = call_json(&f.app, "GET", "/api/docs", Some("stranger"), None).await;
    assert_eq!(labeled(&list, "d1"), 0);
}

#[tokio::test]
async fn document_view_shows_own_labels_and_revs() {
    let f = fixture();
    label(&f.app, "d2", 1, "ann", "FA", 1).await;
    label(&f.app, "d2", 1, "ann", "C", 2).await;
    label(&f.app, "d2", 2, "other", "O", 1).await;
    let (status, doc) = call_json(&f.app, "GET", "/api/docs/d2", Some("ann"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["sentences"][1]["label"], "C");
    assert_eq!(doc["sentences"][1]["rev"], 2);
    assert_eq!(doc["sentences"][2]["label"], Value::Null);
    assert_eq!(doc["sentences"][0]["text"], "Sentence 0 of d2.");
    assert_eq!(
        call(&f.app, "GET", "/api/docs/nope", None, None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn optimistic_revisions() {
    let f = fixture();
    let (status, first) = label(&f.app, "d1", 0, "ann", "PI", 1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["rev"], 1);
    let (status, body) = label(&f.app, "d1", 0, "ann", "BS", 1).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["current"], first);
    let (status, body) = label(&f.app, "d1", 1, "ann", "BS", 3).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["current"], Value::Null);
    assert_eq!(label(&f.app, "d1", 0, "ann", "BS", 2).await.0, StatusCode::OK);
}

#[tokio::test]
async fn bad_requests() {
    let f = fixture();
    assert_eq!(
        label(&f.app, "d1", 0, "ann", "XX", 1).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(label(&f.app, "zz", 0, "ann", "PI", 1).await.0, StatusCode::NOT_FOUND);
    assert_eq!(label(&f.app, "d1", 5, "ann", "PI", 1).await.0, StatusCode::NOT_FOUND);
    let (status, _) = call_json(
        &f.app,
        "POST",
        "/api/docs/d1/labels",
        None,
        Some(json!({ "sentence_idx": 0, "label": "PI", "rev": 1 })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(f.state.records().is_empty());
}

#[tokio::test]
async fn export_holds_latest_revisions_sorted() {
    let f = fixture();
    label(&f.app, "d2", 0, "b", "PI", 1).await;
    label(&f.app, "d1", 3, "a", "T", 1).await;
    label(&f.app, "d1", 3, "a", "G", 2).await;
    label(&f.app, "d1", 0, "a", "PI", 1).await;
    let (status, bytes) = call(&f.app, "GET", "/api/export", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let lines: Vec<Value> = String::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let keys: Vec<(String, u64, String, u64)> = lines
        .iter()
        .map(|l| {
            (
                l["doc_id"].as_str().unwrap().to_string(),
                l["sentence_idx"].as_u64().unwrap(),
                l["label"].as_str().unwrap().to_string(),
                l["rev"].as_u64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        keys,
        vec![
            ("d1".into(), 0, "PI".into(), 1),
            ("d1".into(), 3, "G".into(), 2),
            ("d2".into(), 0, "PI".into(), 1)
        ]
    );
    let (_, again) = call(&f.app, "GET", "/api/export", None, None).await;
    assert_eq!(again, f.state.export_jsonl().into_bytes());
}

#[tokio::test]
async fn pairwise_agreement_of_agreeing_annotators() {
    let f = fixture();
    let codes = ["PI", "BS", "FA", "C", "T", "G", "FI", "O", "PI", "FA"];
    for (i, code) in codes.iter().enumerate() {
        label(&f.app, "d3", i, "a", code, 1).await;
        label(&f.app, "d3", i, "b", code, 1).await;
    }
    let (status, body) = call_json(&f.app, "GET", "/api/agreement?annotators=a,b", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["pairwise"][0]["items"], 10);
    assert_eq!(body["pairwise"][0]["kappa"], 1.0);
    let (_, fleiss) = call_json(&f.app, "GET", "/api/agreement/fleiss", None, None).await;
    assert_eq!(fleiss["overall"]["fleiss"], 1.0);
}

#[tokio::test]
async fn disjoint_annotators_get_a_reasoned_empty_payload() {
    let f = fixture();
    label(&f.app, "d1", 0, "a", "PI", 1).await;
    label(&f.app, "d1", 1, "b", "PI", 1).await;
    for uri in [
        "/api/agreement",
        "/api/agreement?annotators=a,b",
        "/api/agreement/fleiss",
    ] {
        let (status, body) = call_json(&f.app, "GET", uri, None, None).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
        assert_eq!(body["status"], "insufficient_overlap", "{uri}");
        assert!(body["reason"].as_str().unwrap().contains("share"), "{uri}");
    }
}

#[tokio::test]
async fn fleiss_fixture_of_minus_one_third() {
    let f = fixture();
    label(&f.app, "d1", 0, "a", "PI", 1).await;
    label(&f.app, "d1", 0, "b", "PI", 1).await;
    label(&f.app, "d1", 1, "a", "PI", 1).await;
    label(&f.app, "d1", 1, "b", "BS", 1).await;
    let (_, body) = call_json(&f.app, "GET", "/api/agreement/fleiss?annotators=a,b", None, None).await;
    let kappa = body["overall"]["fleiss"].as_f64().unwrap();
    assert!((kappa + 1.0 / 3.0).abs() < 1e-12, "{kappa}");
    let bs = body["overall"]["per_class"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["zone"] == "BS")
        .unwrap();
    assert!((bs["kappa"].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-12);
}

#[tokio::test]
async fn guidelines_list_eight_classes() {
    let f = fixture();
    let (status, body) = call_json(&f.app, "GET", "/api/guidelines", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let codes: Vec<&str> = body["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["code"].as_str().unwrap())
        .collect();
    assert_eq!(codes, ["PI", "BS", "FA", "C", "T", "G", "FI", "O"]);
}

#[tokio::test]
async fn static_ui_is_served_under_root() {
    let f = fixture();
    let (status, body) = call(&f.app, "GET", "/", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("annotator"));
    let (status, body) = call(&f.app, "GET", "/app.js", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"console.log(1);");
    assert_eq!(
        call(&f.app, "GET", "/missing.css", None, None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn no_static_dir_means_api_only() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(corpus(), AnnotationStore::open(dir.path().join("a.jsonl")).unwrap());
    let app = router(state, None);
    assert_eq!(call(&app, "GET", "/", None, None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/api/guidelines", None, None).await.0, StatusCode::OK);
}
