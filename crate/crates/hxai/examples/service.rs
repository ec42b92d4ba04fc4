//! Drive the HTTP API in-process: register data and a model, open a
//! session, ask two questions and print the report. Point a real client at
//! `hxai serve` for the same flow over the network.

use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use hxai::service::{router, AppState};
use hxai::workspace::Workspace;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .expect("valid request");
    let resp = app.clone().oneshot(req).await.expect("router is infallible");
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.expect("body fits");
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let app = router(Arc::new(AppState::new(Workspace::new(dir.path()), None)));

    let steps = [
        ("/datasets", json!({ "id": "credit", "source": "german_credit" })),
        (
            "/models",
            json!({ "kind": "logistic", "name": "bank", "dataset": "credit",
                    "split": { "test_fraction": 0.3, "seed": 1 } }),
        ),
        ("/sessions", json!({ "id": "audit", "role": "regulatory", "dataset": "credit",
                              "models": ["bank"], "protected": ["Sex"] })),
    ];
    for (uri, body) in steps {
        let (status, text) = call(&app, Method::POST, uri, Some(body)).await;
        println!("POST {uri} -> {status}");
        assert!(status.is_success(), "{text}");
    }

    let questions = [
        json!({ "category": "group_disparity", "params": { "protected": "Sex" } }),
        json!({ "category": "global_feature_effect", "params": { "feature": "Duration in month" } }),
    ];
    for q in questions {
        let (status, text) = call(&app, Method::POST, "/sessions/audit/questions?enqueue=true", Some(q)).await;
        println!("POST /sessions/audit/questions -> {status} {text}");
    }
    for n in 1..=2 {
        let uri = format!("/sessions/audit/artifacts/{n}");
        loop {
            let (status, text) = call(&app, Method::GET, &uri, None).await;
            if status != StatusCode::ACCEPTED {
                let kind = serde_json::from_str::<Value>(&text).map(|v| v["kind"].clone()).unwrap_or_default();
                println!("GET {uri} -> {status} ({kind})");
                break;
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }
    let (_, report) = call(&app, Method::GET, "/sessions/audit/report?format=text", None).await;
    println!("\n{report}");
}
