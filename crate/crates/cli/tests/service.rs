mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use common::*;
use priorart::commands::load_engine;
use priorart::service::{router, serve, AppState};
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;

fn app(index: &Path) -> Router {
    let engine = load_engine(index).unwrap();
    router(Arc::new(AppState { engine, n_candidates: 100, k_final: 10 }))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, String) {
    let res = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = res.status();
    let body = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(body.to_vec()).unwrap())
}

fn dir_digest(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[tokio::test]
async fn health_reports_span_count() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&build_index(dir.path()));
    let (status, body) = get(&app, "/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap(), serde_json::json!({"status": "ok", "spans": 28}));
}

#[tokio::test]
async fn search_contract() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&build_index(dir.path()));
    let (status, body) = get(&app, "/search?q=proximity+sensor&mode=rerank&require=proximity").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!((v["query"].as_str(), v["mode"].as_str()), (Some("proximity sensor"), Some("rerank")));
    assert_eq!((v["n"].as_u64(), v["k"].as_u64()), (Some(100), Some(10)));
    assert_eq!(v["require"], serde_json::json!(["proximity"]));
    let results = v["results"].as_array().unwrap();
    assert!(!results.is_empty());
    let keys =
        ["span_id", "patent_id", "kind", "ordinal", "text", "bm25_rank", "bm25_score", "embed_rank", "cosine_score"];
    let mut pos = body.find("\"results\":[{").unwrap();
    for k in keys {
        let at = body[pos..].find(&format!("\"{k}\":")).unwrap_or_else(|| panic!("{k} missing"));
        pos += at;
    }
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&build_index(dir.path()));
    for uri in [
        "/search",
        "/search?mode=rerank",
        "/search?q=x&mode=hybrid",
        "/search?q=x&n=-1",
        "/search?q=x&k=0",
        "/search?q=x&n=5&k=10",
        "/search?q=x&page=2",
        "/search?q=---",
    ] {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        let v: Value = serde_json::from_str(&body).unwrap();
        assert!(v["error"].is_string(), "{uri}");
    }
}

#[tokio::test]
async fn unknown_path_is_404_and_writes_not_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&build_index(dir.path()));
    let (status, body) = get(&app, "/index").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body, r#"{"error":"not found"}"#);
    let res = app.clone().oneshot(Request::post("/search?q=x").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.status(), StatusCode::METHOD_NOT_ALLOWED);
}

#[tokio::test]
async fn concurrent_identical_requests_identical_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let before = dir_digest(&index);
    let app = app(&index);
    let mut tasks = Vec::new();
    for _ in 0..64 {
        let app = app.clone();
        tasks.push(tokio::spawn(
            async move { get(&app, "/search?q=mobile+telephone+network&mode=rerank&n=20&k=5").await },
        ));
    }
    let mut bodies = Vec::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(body);
    }
    assert!(bodies.iter().all(|b| *b == bodies[0]));
    for mode in ["bm25_only", "embedding_only", "rerank"] {
        for _ in 0..20 {
            get(&app, &format!("/search?q=sensor+threshold&mode={mode}")).await;
        }
    }
    assert_eq!(dir_digest(&index), before);
}

#[tokio::test]
async fn cli_and_service_bodies_match() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let app = app(&index);
    let cases = [
        ("mobile telephone network", "rerank", vec![]),
        ("proximity sensor", "bm25_only", vec!["proximity"]),
        ("optical lens", "embedding_only", vec![]),
        ("zeppelin", "rerank", vec![]),
    ];
    for (q, mode, require) in cases {
        let mut args = vec!["search", q, "--index-dir", index.to_str().unwrap(), "--mode", mode, "--json"];
        let mut uri = format!("/search?q={}&mode={mode}", q.replace(' ', "+"));
        for r in &require {
            args.extend(["--require", r]);
            uri.push_str(&format!("&require={r}"));
        }
        let out = run(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        let (status, body) = get(&app, &uri).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(stdout(&out), format!("{body}\n"), "{q} / {mode}");
    }
}

#[tokio::test]
async fn serves_over_tcp_and_shuts_down_gracefully() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let engine = load_engine(&index).unwrap();
    let state = Arc::new(AppState { engine, n_candidates: 100, k_final: 10 });
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, state, async {
        let _ = rx.await;
    }));

    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream.write_all(b"GET /search?q=wireless HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).await.unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("content-type: application/json"));
    assert!(response.contains("\"query\":\"wireless\""));

    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}

#[test]
fn bind_failure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let index = build_index(dir.path());
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let out = run(&["serve", "--index-dir", index.to_str().unwrap(), "--bind", &addr]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cannot bind"));
}
