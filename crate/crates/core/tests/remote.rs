//! Remote describer and embedder clients against in-process mock servers.

use std::sync::{Arc, Mutex};

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use scenario_search::corpus::{read_descriptions, FrameRef, RecordId};
use scenario_search::describe::{describe_video, get_prompt, DescribeError, RemoteBackend};
use scenario_search::embedding::{EmbedError, EmbeddingProvider, RemoteProvider};
use scenario_search::ingest::sample_frames;

fn spawn(app: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn frames(record: &RecordId, n: u32) -> Vec<FrameRef> {
    (0..n)
        .map(|i| FrameRef {
            record: record.clone(),
            index: i,
            timestamp: i as f64 * 0.1,
            uri: format!("{i}.jpg"),
        })
        .collect()
}

fn published_text(prompt: u8) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/record_000005.jsonl");
    read_descriptions(&path)
        .unwrap()
        .into_iter()
        .find(|d| d.prompt_id == Some(prompt))
        .unwrap()
        .text
}

#[test]
fn multi_run_prompt_returns_reply_verbatim() {
    let reply = published_text(5);
    assert!(reply.starts_with("Driving conditions:"));
    let seen: Arc<Mutex<Option<Value>>> = Arc::default();
    let (seen_in, reply_in) = (seen.clone(), reply.clone());
    let url = spawn(Router::new().route(
        "/describe",
        post(move |Json(body): Json<Value>| async move {
            *seen_in.lock().unwrap() = Some(body);
            Json(json!({ "text": reply_in }))
        }),
    ));

    let rid = RecordId::new("000005").unwrap();
    let sampled = sample_frames(&frames(&rid, 300), 32).unwrap();
    let prompt = get_prompt(5).unwrap();
    let d = describe_video(&rid, &sampled, &prompt, &RemoteBackend::new(url, "mock-vlm")).unwrap();
    assert_eq!(d.text.as_bytes(), reply.as_bytes());
    assert_eq!(d.prompt_id, Some(5));
    assert_eq!(d.generator, "mock-vlm");

    let body = seen.lock().unwrap().take().unwrap();
    assert_eq!(body["frames"].as_array().unwrap().len(), 32);
    assert_eq!(body["frames"][0], "0.jpg");
    assert_eq!(body["frames"][31], "299.jpg");
    let turns: Vec<String> = serde_json::from_value(body["turns"].clone()).unwrap();
    assert_eq!(turns.len(), 5);
    assert_eq!(turns.join(" "), prompt.text());
}

#[test]
fn http_error_status_is_backend_unavailable() {
    let url = spawn(Router::new().route(
        "/describe",
        post(|| async { (StatusCode::SERVICE_UNAVAILABLE, "model loading") }),
    ));
    let rid = RecordId::new("000001").unwrap();
    let err = describe_video(&rid, &frames(&rid, 4), &get_prompt(1).unwrap(), &RemoteBackend::new(url, "m")).unwrap_err();
    match err {
        DescribeError::BackendUnavailable { status, message } => {
            assert_eq!(status, Some(503));
            assert_eq!(message, "model loading");
        }
        other => panic!("{other}"),
    }
}

#[test]
fn blank_reply_is_empty_description() {
    let url = spawn(Router::new().route("/describe", post(|| async { Json(json!({"text": "  "})) })));
    let rid = RecordId::new("000001").unwrap();
    let err = describe_video(&rid, &frames(&rid, 4), &get_prompt(1).unwrap(), &RemoteBackend::new(url, "m")).unwrap_err();
    assert!(matches!(err, DescribeError::EmptyDescription(_)));
}

#[test]
fn remote_embedder_normalises_and_checks_dim() {
    let url = spawn(Router::new().route(
        "/embed",
        post(|Json(body): Json<Value>| async move {
            let n = body["texts"].as_array().unwrap().len();
            Json(json!({ "vectors": vec![[3.0, 4.0]; n] }))
        }),
    ));
    let p = RemoteProvider::new(url.clone(), "mock", 2);
    assert_eq!(p.fingerprint(), "remote/mock/dim=2");
    let v = p.embed_batch(&["a", "b"]).unwrap();
    assert_eq!(v.len(), 2);
    assert_eq!(v[0].as_slice(), &[0.6, 0.8]);

    let wrong = RemoteProvider::new(url, "mock", 3);
    assert!(matches!(wrong.embed("a"), Err(EmbedError::DimMismatch { left: 2, right: 3 })));
}

#[test]
fn remote_embedder_down_is_provider_unavailable() {
    let p = RemoteProvider::new("http://127.0.0.1:9", "mock", 2);
    assert!(matches!(p.embed("a"), Err(EmbedError::ProviderUnavailable(_))));
}
