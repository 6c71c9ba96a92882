use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use cptwb_service::{router, Mutation, Registry};

const HEPAR: &str = include_str!("../../../fixtures/hepar.cptn");
const HEPAR_COL0: [f64; 6] = [0.015306, 0.193878, 0.0867343, 0.168367, 0.204082, 0.331633];

const QUAD: &str = r#"{"formatVersion": 1,
  "nodes": [{"id": "Q", "name": "Q", "outcomes": ["a", "b", "c", "d"], "parents": []}],
  "cpts": {"Q": {"parentOrder": [], "values": [0.25, 0.25, 0.25, 0.25], "status": ["default"]}}}"#;

fn app() -> Router {
    router(Arc::new(Registry::new()))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, bytes.to_vec())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, version: Option<u64>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(v) = version {
        req = req.header(header::IF_MATCH, format!("\"{v}\""));
    }
    let body = match body {
        Some(b) => Body::from(b.to_string()),
        None => Body::empty(),
    };
    let (status, bytes) = send(app, req.body(body).unwrap()).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn post_doc(app: &Router, doc: &str) -> (StatusCode, Value) {
    let req = Request::post("/api/networks").body(Body::from(doc.to_owned())).unwrap();
    let (status, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn load(app: &Router, doc: &str) -> String {
    let (status, body) = post_doc(app, doc).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_owned()
}

fn probs(v: &Value) -> Vec<f64> {
    v["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect()
}

#[tokio::test]
async fn load_network_endpoint() {
    let app = app();
    let (status, body) = post_doc(&app, HEPAR).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["version"], 1);
    let (_, again) = post_doc(&app, HEPAR).await;
    assert_ne!(again["id"], body["id"]);

    let (status, err) = post_doc(&app, "{\"formatVersion\": 1, \"nodes\": [").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"], "SyntaxError");
    assert!(err.get("path").is_some());

    let (status, _) = call(&app, "GET", "/api/networks/n999", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn canonical_document_round_trip() {
    let app = app();
    let id = load(&app, HEPAR).await;
    let req = Request::get(format!("/api/networks/{id}")).body(Body::empty()).unwrap();
    let (status, bytes) = send(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(bytes).unwrap(), HEPAR);
}

#[tokio::test]
async fn editor_roundtrip() {
    let app = app();
    let id = load(&app, HEPAR).await;
    let sel = json!({"selection": [{"node": "Disorder", "outcomes": [0, 0, 0]}]});
    let (status, view) = call(&app, "POST", &format!("/api/networks/{id}/nodes/Disorder/editors"), Some(sel), None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(probs(&view), HEPAR_COL0);
    assert_eq!(view["mixed"], false);

    let q = load(&app, QUAD).await;
    let sel = json!({"selection": [{"node": "Q", "outcomes": []}]});
    let (_, view) = call(&app, "POST", &format!("/api/networks/{q}/nodes/Q/editors"), Some(sel), None).await;
    let eid = view["editorId"].as_str().unwrap().to_owned();
    let (status, view) = call(
        &app,
        "POST",
        &format!("/api/editors/{eid}/probability"),
        Some(json!({"outcome": 0, "target": 0.4})),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    for (a, b) in probs(&view).iter().zip([0.4, 0.2, 0.2, 0.2]) {
        assert!((a - b).abs() < 1e-15);
    }
    for k in 0..4 {
        let (status, v) = call(&app, "POST", &format!("/api/editors/{eid}/lock"), Some(json!({"outcome": k})), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["locked"][k], true);
    }
    let (status, err) = call(
        &app,
        "POST",
        &format!("/api/editors/{eid}/probability"),
        Some(json!({"outcome": 1, "target": 0.1})),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "OutcomeLocked");
}

#[tokio::test]
async fn editor_views_carry_chart_geometry() {
    let app = app();
    let id = load(&app, HEPAR).await;
    let sel = json!({"selection": [{"node": "Disorder", "outcomes": [0, 0, 0]}]});
    let (_, view) = call(
        &app,
        "POST",
        &format!("/api/networks/{id}/nodes/Disorder/editors?labelMode=percentage"),
        Some(sel),
        None,
    )
    .await;
    assert_eq!(view["pie"]["sectors"][0]["label"], "Active_hepat 1.5%");
    assert_eq!(view["bar"]["bars"][5]["lengthFraction"], 0.331633);
    let eid = view["editorId"].as_str().unwrap();
    let (_, text) = call(&app, "GET", &format!("/api/editors/{eid}"), None, None).await;
    assert_eq!(text["pie"]["sectors"][0]["label"], "Active_hepat");
}

#[tokio::test]
async fn versioned_mutations() {
    let app = app();
    let id = load(&app, HEPAR).await;
    let uri = format!("/api/networks/{id}/nodes/Disorder/reorder");
    let perm = json!({"permutation": [2, 0, 1]});

    let (status, err) = call(&app, "POST", &uri, Some(perm.clone()), None).await;
    assert_eq!(status, StatusCode::PRECONDITION_REQUIRED, "{err}");

    let (status, body) = call(&app, "POST", &uri, Some(perm.clone()), Some(1)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], 2);

    let doc_before = send(&app, Request::get(format!("/api/networks/{id}")).body(Body::empty()).unwrap()).await;
    let (status, err) = call(&app, "POST", &uri, Some(perm), Some(1)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "VersionConflict");
    let doc_after = send(&app, Request::get(format!("/api/networks/{id}")).body(Body::empty()).unwrap()).await;
    assert_eq!(doc_before, doc_after);

    let (status, err) = call(
        &app,
        "POST",
        &format!("/api/networks/{id}/nodes/Disorder/columns"),
        Some(json!({"columns": [0], "distribution": [0.5, 0.4, 0, 0, 0, 0]})),
        Some(2),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "InvalidDistribution");

    let (status, err) = call(&app, "POST", &format!("/api/networks/{id}/nodes/Nope/reorder"), Some(json!({"permutation": []})), Some(2)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"], "UnknownNode");

    let (status, err) = call(&app, "POST", &uri, Some(json!({"permutation": [0, 0, 1]})), Some(2)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "InvalidPermutation");
}

#[tokio::test]
async fn commit_through_http() {
    let app = app();
    let id = load(&app, HEPAR).await;
    let sel = json!({"selection": [
        {"node": "Disorder", "outcomes": [0, 1, 0]},
        {"node": "Disorder", "outcomes": [1, 1, 0]}]});
    let (_, view) = call(&app, "POST", &format!("/api/networks/{id}/nodes/Disorder/editors"), Some(sel), None).await;
    assert_eq!(view["mixed"], true);
    let eid = view["editorId"].as_str().unwrap().to_owned();
    call(&app, "POST", &format!("/api/editors/{eid}/probability"), Some(json!({"outcome": 1, "target": 0.5})), None).await;
    let (status, body) = call(&app, "POST", &format!("/api/editors/{eid}/commit"), None, Some(1)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], 2);
    let (status, _) = call(&app, "POST", &format!("/api/editors/{eid}/commit"), None, Some(1)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", "/api/editors/e999/commit", None, Some(2)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, views) = call(&app, "POST", &format!("/api/networks/{id}/nodes/Disorder/editors"),
        Some(json!({"selection": [{"node": "Disorder", "outcomes": [1, 1, 0]}]})), None).await;
    assert_eq!(views["probs"][1], 0.5);
}

#[tokio::test]
async fn tree_and_table_views() {
    let app = app();
    let id = load(&app, HEPAR).await;
    let (status, tree) = call(&app, "GET", &format!("/api/networks/{id}/nodes/Disorder/tree?client=a"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tree["kind"], "nameNode");
    assert_eq!(tree["label"], "Alcoholism");
    assert_eq!(tree["children"][0]["expanded"], true);

    let ctx = json!({"context": {"node": "Disorder", "outcomes": [0]}});
    let (status, tree) = call(&app, "POST", &format!("/api/networks/{id}/nodes/Disorder/tree/toggle?client=a"), Some(ctx.clone()), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tree["children"][0]["expanded"], false);
    assert_eq!(tree["children"][0]["children"][0]["hidden"], true);
    // other clients keep their own state
    let (_, other) = call(&app, "GET", &format!("/api/networks/{id}/nodes/Disorder/tree?client=b"), None, None).await;
    assert_eq!(other["children"][0]["expanded"], true);

    let (_, grid) = call(&app, "POST", &format!("/api/networks/{id}/nodes/Disorder/table/toggle?client=a"), Some(ctx), None).await;
    assert_eq!(grid["valueColumns"].as_array().unwrap().len(), 5);
    assert_eq!(grid["valueColumns"][0]["type"], "placeholder");
    let (_, grid) = call(&app, "GET", &format!("/api/networks/{id}/nodes/Disorder/table?client=a"), None, None).await;
    assert_eq!(grid["headerRows"][1]["cells"][0]["label"], "…");

    let bad = json!({"context": {"node": "Disorder", "outcomes": []}});
    let (status, err) = call(&app, "POST", &format!("/api/networks/{id}/nodes/Disorder/table/toggle"), Some(bad), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "InvalidContext");

    // toggles do not move the content version
    let (status, _) = call(&app, "POST", &format!("/api/networks/{id}/nodes/Disorder/reorder"), Some(json!({"permutation": [0, 1, 2]})), Some(1)).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn validation_endpoint() {
    let app = app();
    let id = load(&app, HEPAR).await;
    let (status, report) = call(&app, "GET", &format!("/api/networks/{id}/validation?tol=1e-4"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report, json!({"sumViolations": [], "unspecified": []}));
    let q = load(&app, QUAD).await;
    let (_, report) = call(&app, "GET", &format!("/api/networks/{q}/validation"), None, None).await;
    assert_eq!(report["unspecified"][0]["node"], "Q");
}

#[tokio::test]
async fn restart_reproduces_bodies() {
    let first = app();
    let id = load(&first, HEPAR).await;
    call(&first, "POST", &format!("/api/networks/{id}/nodes/Disorder/reorder"), Some(json!({"permutation": [2, 0, 1]})), Some(1)).await;
    let get = |id: &str| Request::get(format!("/api/networks/{id}")).body(Body::empty()).unwrap();
    let (_, persisted) = send(&first, get(&id)).await;
    let (_, tree1) = call(&first, "GET", &format!("/api/networks/{id}/nodes/Disorder/tree"), None, None).await;

    let second = app();
    let id2 = load(&second, std::str::from_utf8(&persisted).unwrap()).await;
    let (_, reloaded) = send(&second, get(&id2)).await;
    assert_eq!(persisted, reloaded);
    let (_, tree2) = call(&second, "GET", &format!("/api/networks/{id2}/nodes/Disorder/tree"), None, None).await;
    assert_eq!(tree1, tree2);
}

#[test]
fn concurrent_writers_linearize() {
    let reg = Arc::new(Registry::new());
    let (id, _) = reg.load(HEPAR.as_bytes()).unwrap();
    let threads: Vec<_> = (0..8)
        .map(|t| {
            let reg = reg.clone();
            let id = id.clone();
            std::thread::spawn(move || {
                let mut won = Vec::new();
                for i in 0..50 {
                    let v = reg.version(&id).unwrap();
                    let a = 0.01 * ((t * 50 + i) % 90) as f64;
                    let m = Mutation::SetColumns {
                        node: "Alcoholism".into(),
                        columns: vec![0],
                        distribution: vec![a, 1.0 - a],
                        status: cptwb_core::ColumnStatus::Elicited,
                    };
                    if let Ok(new) = reg.apply(&id, m, v) {
                        assert_eq!(new, v + 1);
                        won.push(new);
                    }
                }
                won
            })
        })
        .collect();
    let mut all = Vec::new();
    for t in threads {
        all.extend(t.join().unwrap());
    }
    let unique: BTreeSet<u64> = all.iter().copied().collect();
    assert_eq!(unique.len(), all.len());
    assert_eq!(reg.version(&id).unwrap(), 1 + all.len() as u64);
    assert_eq!(unique, (2..=1 + all.len() as u64).collect());
}
