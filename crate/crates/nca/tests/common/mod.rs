#![allow(dead_code)]

pub mod golden;
pub mod parity;

use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use nca::checkpoint::Checkpoint;
use nca_core::model::Hyper;
use nca_core::{Seq2SeqParams, Vocab};
use serde_json::Value;
use tower::ServiceExt;

pub const PAIRS: [(&str, &str); 4] = [
    ("i don't want to work today .", "why not ?"),
    (
        "i just want to lie in bed and have pizza .",
        "good idea , may i join you ?",
    ),
    ("hello my friend", "hi there"),
    ("what is your name ?", "i am a bot ."),
];

/// Small random-init model over the pairs above.
pub fn toy_checkpoint(seed: u64) -> Checkpoint {
    let vocab = Vocab::build(&PAIRS, 1);
    let hyper = Hyper {
        vocab_size: vocab.len(),
        embed_dim: 8,
        hidden_dim: 8,
        max_len: 8,
    };
    Checkpoint::new(Seq2SeqParams::init(hyper, seed), vocab)
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<&str>,
) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(
            body.map(|b| Body::from(b.to_owned()))
                .unwrap_or_else(Body::empty),
        )
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("non-JSON body {bytes:?}: {e}"))
    };
    (status, value)
}

/// Sorted top-level keys of a JSON object.
pub fn keys(v: &Value) -> Vec<&str> {
    let mut k: Vec<&str> = v
        .as_object()
        .expect("object")
        .keys()
        .map(String::as_str)
        .collect();
    k.sort();
    k
}

pub fn assert_api_error(status: StatusCode, body: &Value, want_status: StatusCode, code: &str) {
    assert_eq!(status, want_status, "{body}");
    assert_eq!(keys(body), ["code", "message"], "{body}");
    assert_eq!(body["code"], code);
    assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()));
}
