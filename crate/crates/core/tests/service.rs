mod common;

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mlscope::artifact::ArtifactKind;
use mlscope::bundle::{build_spec, ComponentConfig, ComponentInstance, PageAssignment, SpecInput};
use mlscope::service::{bind, router, AppState, ServerConfig, ServiceError};
use mlscope::state::{derive_view, encode_state, StateDoc};
use mlscope::table::MetadataTable;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

fn table() -> MetadataTable {
    common::random_table(&mut ChaCha8Rng::seed_from_u64(8), 150)
}

fn app_with(t: MetadataTable, base: Option<String>, read_only: bool) -> Router {
    let input = SpecInput {
        title: "svc".into(),
        components: vec![ComponentInstance::new(ComponentConfig::List { columns: vec![] })],
        pages: vec![PageAssignment {
            name: "main".into(),
            components: vec![0],
        }],
        initial_state: StateDoc::default(),
        instance_base_uri: base,
        instance_column: None,
    };
    let spec = build_spec(&input, t.schema()).unwrap();
    let mut artifacts = HashMap::new();
    artifacts.insert(ArtifactKind::Confusion, b"{\"kind\":\"confusion\"}\n".to_vec());
    router(Arc::new(AppState::new(t, spec, artifacts, read_only)))
}

async fn call(app: &Router, method: Method, uri: &str, body: &str) -> (StatusCode, Vec<u8>, Option<String>) {
    let resp = app
        .clone()
        .oneshot(
            Request::builder()
                .method(method)
                .uri(uri)
                .body(Body::from(body.to_string()))
                .unwrap(),
        )
        .await
        .unwrap();
    let status = resp.status();
    let location = resp
        .headers()
        .get(header::LOCATION)
        .map(|v| v.to_str().unwrap().to_string());
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec(), location)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>, Option<String>) {
    call(app, Method::GET, uri, "").await
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::test]
async fn spec_and_schema() {
    let app = app_with(table(), None, false);
    let (status, body, _) = get(&app, "/api/spec").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body)["version"], 1);
    let (status, body, _) = get(&app, "/api/schema").await;
    assert_eq!(status, StatusCode::OK);
    assert!(json(&body).as_array().unwrap().len() >= 7);
}

#[tokio::test]
async fn view_matches_derive_view() {
    let t = table();
    let app = app_with(t.clone(), None, false);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let state = common::random_state(&mut rng, &t);
        let token = encode_state(&state);
        let (status, body, _) = get(&app, &format!("/api/view?state={}", token.as_str())).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, derive_view(&t, &state).unwrap().to_json().into_bytes());
    }
}

#[tokio::test]
async fn table_page_shape() {
    let app = app_with(table(), None, false);
    let (status, body, _) = get(&app, "/api/table?page=1").await;
    assert_eq!(status, StatusCode::OK);
    let v = json(&body);
    assert_eq!(v["page"], 1);
    assert_eq!(v["filtered_count"], 150);
    assert_eq!(v["rows"].as_array().unwrap().len(), 20);
    assert_eq!(v["columns"][0], "id");
}

#[tokio::test]
async fn state_round_trip() {
    let t = table();
    let app = app_with(t.clone(), None, false);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let state = common::random_state(&mut rng, &t);
    let token = encode_state(&state);
    let (status, _, _) = call(&app, Method::PUT, "/api/state", token.as_str()).await;
    assert_eq!(status, StatusCode::OK);
    let (_, body, _) = get(&app, "/api/state").await;
    assert_eq!(json(&body)["token"], token.as_str());
    // without ?state= the stored state applies
    let (_, body, _) = get(&app, "/api/view").await;
    assert_eq!(body, derive_view(&t, &state).unwrap().to_json().into_bytes());
}

#[tokio::test]
async fn malformed_token_rejected() {
    let app = app_with(table(), None, false);
    let (status, body, _) = call(&app, Method::PUT, "/api/state", "%%%not-a-token").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["error"], "MalformedToken");
    let (status, body, _) = get(&app, "/api/view?state=AAAA").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["error"], "MalformedToken");
}

#[tokio::test]
async fn invalid_state_lists_fields() {
    let app = app_with(table(), None, false);
    let doc = StateDoc {
        group_by: Some("score".into()),
        ..StateDoc::default()
    };
    let token = mlscope::state::StateToken::from_doc(&doc);
    let (status, body, _) = get(&app, &format!("/api/view?state={}", token.as_str())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v = json(&body);
    assert_eq!(v["error"], "InvalidState");
    assert!(v["fields"].is_array());
}

#[tokio::test]
async fn read_only_refuses_put() {
    let t = table();
    let app = app_with(t.clone(), None, true);
    let token = encode_state(&common::random_state(&mut ChaCha8Rng::seed_from_u64(3), &t));
    let (status, body, _) = call(&app, Method::PUT, "/api/state", token.as_str()).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(json(&body)["error"], "ReadOnly");
}

#[tokio::test]
async fn artifacts() {
    let app = app_with(table(), None, false);
    let (status, body, _) = get(&app, "/api/artifact/confusion").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body)["kind"], "confusion");
    let (status, body, _) = get(&app, "/api/artifact/summary").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json(&body)["error"], "MissingArtifact");
    let (status, body, _) = get(&app, "/api/artifact/bogus").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json(&body)["error"], "UnknownKind");
}

#[tokio::test]
async fn local_instance_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r0"), b"sample bytes").unwrap();
    let app = app_with(table(), Some(dir.path().display().to_string()), false);
    let (status, body, _) = get(&app, "/instances/r0").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"sample bytes");
    let (status, body, _) = get(&app, "/instances/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json(&body)["error"], "UnknownId");
}

#[tokio::test]
async fn remote_instance_redirects() {
    let app = app_with(table(), Some("https://example.org/data/".into()), false);
    let (status, _, location) = get(&app, "/instances/r3").await;
    assert_eq!(status, StatusCode::TEMPORARY_REDIRECT);
    assert_eq!(location.as_deref(), Some("https://example.org/data/r3"));
}

#[tokio::test]
async fn port_in_use() {
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port();
    let config = ServerConfig::new("unused.csv", port);
    match bind(&config).await {
        Err(ServiceError::PortInUse(p)) => assert_eq!(p, port),
        other => panic!("expected PortInUse, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn config_validation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    std::fs::write(&csv, "id\na\n").unwrap();
    assert!(ServerConfig::new(&csv, 8765).validate().is_ok());
    assert!(ServerConfig::new(&csv, 80).validate().is_err());
    assert!(ServerConfig::new(dir.path().join("missing.csv"), 8765).validate().is_err());
}
