//! Golden request/response checks for every endpoint.

use std::sync::Arc;

use super::{assert_api_error, call, keys, toy_checkpoint};
use axum::http::StatusCode;
use axum::Router;
use nca::checkpoint::Checkpoint;
use nca::server::{router, AppState, ServerOptions};
use serde_json::{json, Value};

fn app() -> Router {
    let opts = ServerOptions {
        clock: Arc::new(|| 1_500_000_000),
        ..ServerOptions::default()
    };
    router(AppState::new(Some(toy_checkpoint(7)), opts))
}

async fn new_session(app: &Router, body: Option<&str>) -> String {
    let (status, v) = call(app, "POST", "/api/session", body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["sessionId"].as_str().unwrap().to_owned()
}

async fn send(app: &Router, id: &str, text: &str) -> Value {
    let body = json!({ "text": text }).to_string();
    let (status, v) = call(
        app,
        "POST",
        &format!("/api/session/{id}/message"),
        Some(&body),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

async fn feedback(app: &Router, id: &str, body: Value) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/api/session/{id}/feedback"),
        Some(&body.to_string()),
    )
    .await
}

pub async fn create_session_shapes() {
    let app = app();
    let (status, v) = call(&app, "POST", "/api/session", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(keys(&v), ["config", "sessionId"]);
    assert_eq!(
        keys(&v["config"]),
        ["k", "lambdaFirst", "lambdaRest", "lr", "ordering", "seed"]
    );
    assert_eq!(v["config"]["k"], 5);
    assert_eq!(v["config"]["lr"], 0.001);

    let (_, w) = call(&app, "POST", "/api/session", Some(r#"{"k": 3}"#)).await;
    assert_eq!(w["config"]["k"], 3);
    assert_ne!(v["sessionId"], w["sessionId"]);

    let (s, e) = call(&app, "POST", "/api/session", Some(r#"{"beams": 3}"#)).await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
    let (s, e) = call(&app, "POST", "/api/session", Some(r#"{"k": 0}"#)).await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
    let (s, e) = call(&app, "POST", "/api/session", Some("{not json")).await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
}

pub async fn create_session_without_model_conflicts() {
    let app = router(AppState::new(None, ServerOptions::default()));
    let (s, e) = call(&app, "POST", "/api/session", None).await;
    assert_api_error(s, &e, StatusCode::CONFLICT, "conflict");
}

pub async fn message_shapes() {
    let app = app();
    let id = new_session(&app, Some(r#"{"ordering": "likelihood"}"#)).await;
    let v = send(&app, &id, "hello my friend").await;
    assert_eq!(keys(&v), ["candidates", "displayOrder"]);
    let cands = v["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 5);
    let scores: Vec<f64> = cands
        .iter()
        .enumerate()
        .map(|(i, c)| {
            assert_eq!(keys(c), ["index", "logScore", "text"]);
            assert_eq!(c["index"], i + 1);
            c["logScore"].as_f64().unwrap()
        })
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");

    let id = new_session(&app, Some(r#"{"ordering": "random", "seed": 9}"#)).await;
    let v = send(&app, &id, "hello my friend").await;
    let mut order: Vec<u64> = v["displayOrder"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    order.sort();
    assert_eq!(order, [1, 2, 3, 4, 5]);
}

pub async fn message_errors() {
    let app = app();
    let (s, e) = call(
        &app,
        "POST",
        "/api/session/nope/message",
        Some(r#"{"text":"hi"}"#),
    )
    .await;
    assert_api_error(s, &e, StatusCode::NOT_FOUND, "not_found");
    let id = new_session(&app, None).await;
    let uri = format!("/api/session/{id}/message");
    let (s, e) = call(&app, "POST", &uri, Some(r#"{"text":"   "}"#)).await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
    let (s, e) = call(&app, "POST", &uri, Some(r#"{}"#)).await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
}

pub async fn feedback_shapes() {
    let app = app();
    let id = new_session(&app, None).await;

    send(&app, &id, "i don't want to work today .").await;
    let (s, v) = feedback(&app, &id, json!({"select": 2})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(keys(&v), ["chosenResponse", "loss", "updated"]);
    assert_eq!(v["updated"], true);
    let loss = v["loss"].as_f64().unwrap();
    assert!(loss.is_finite() && loss >= 0.0);

    send(&app, &id, "i just want to lie in bed and have pizza .").await;
    let (s, v) = feedback(&app, &id, json!({"text": "Good idea, may I join you?"})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["chosenResponse"], "Good idea, may I join you?");
    assert_eq!(v["updated"], true);

    send(&app, &id, "hello my friend").await;
    let (s, v) = feedback(&app, &id, json!({"skip": true})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(keys(&v), ["chosenResponse", "updated"]);
    assert_eq!(v["updated"], false);
}

pub async fn feedback_errors() {
    let app = app();
    let (s, e) = feedback(&app, "s99", json!({"skip": true})).await;
    assert_api_error(s, &e, StatusCode::NOT_FOUND, "not_found");

    let id = new_session(&app, None).await;
    let (s, e) = feedback(&app, &id, json!({"select": 1})).await;
    assert_api_error(s, &e, StatusCode::CONFLICT, "conflict");

    send(&app, &id, "hello my friend").await;
    for bad in [
        json!({"select": 6}),
        json!({"select": 0}),
        json!({"select": 1, "skip": true}),
        json!({"skip": false}),
        json!({}),
        json!({"choose": 1}),
    ] {
        let (s, e) = feedback(&app, &id, bad.clone()).await;
        assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
    }
    // the turn is still pending after rejected feedback
    let (s, _) = feedback(&app, &id, json!({"select": 1})).await;
    assert_eq!(s, StatusCode::OK);
}

pub async fn transcript_and_config() {
    let app = app();
    let id = new_session(&app, None).await;
    let tr = format!("/api/session/{id}/transcript");
    let cfg = format!("/api/session/{id}/config");

    let (s, v) = call(&app, "GET", &tr, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!([]));

    let (s, v) = call(&app, "PATCH", &cfg, Some(r#"{"lr": 0.005}"#)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(
        keys(&v),
        ["k", "lambdaFirst", "lambdaRest", "lr", "ordering", "seed"]
    );
    assert_eq!(v["lr"], 0.005);

    send(&app, &id, "hello my friend").await;
    feedback(&app, &id, json!({"select": 1})).await;
    send(&app, &id, "what is your name ?").await;
    // a second message skips the pending turn
    send(&app, &id, "hello my friend").await;
    feedback(&app, &id, json!({"skip": true})).await;

    let (_, v) = call(&app, "GET", &tr, None).await;
    let records = v.as_array().unwrap();
    assert_eq!(records.len(), 3);
    let first = &records[0];
    assert_eq!(
        keys(first),
        [
            "candidates",
            "chosenResponse",
            "displayPermutation",
            "feedbackType",
            "feedbackValue",
            "lossAfterUpdate",
            "lr",
            "timestamp",
            "turn",
            "userMsg"
        ]
    );
    assert_eq!(first["lr"], 0.005);
    assert_eq!(first["feedbackType"], "select");
    assert_eq!(first["timestamp"], 1_500_000_000u64);
    assert_eq!(records[1]["feedbackType"], "skip");
    assert_eq!(records[1]["userMsg"], "what is your name ?");
    assert!(records[1].get("lossAfterUpdate").is_none());

    let (s, e) = call(&app, "PATCH", &cfg, Some(r#"{"lr": -1}"#)).await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
    let (s, e) = call(&app, "PATCH", &cfg, Some(r#"{"temperature": 1}"#)).await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
    let (s, e) = call(&app, "GET", "/api/session/zz/transcript", None).await;
    assert_api_error(s, &e, StatusCode::NOT_FOUND, "not_found");
    let (s, e) = call(&app, "PATCH", "/api/session/zz/config", Some("{}")).await;
    assert_api_error(s, &e, StatusCode::NOT_FOUND, "not_found");
}

pub async fn checkpoint_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let app = app();
    let base = dir.path().join("base.nca");
    let body = json!({"action": "save", "path": base}).to_string();
    let (s, v) = call(&app, "POST", "/api/checkpoint", Some(&body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "saved");
    assert_eq!(
        Checkpoint::load(&base).unwrap().params,
        toy_checkpoint(7).params
    );

    // a message alone never changes the session weights
    let id = new_session(&app, None).await;
    send(&app, &id, "hello my friend").await;
    let after_msg = dir.path().join("msg.nca");
    let body = json!({"action": "save", "path": after_msg, "sessionId": id}).to_string();
    call(&app, "POST", "/api/checkpoint", Some(&body)).await;
    assert_eq!(
        Checkpoint::load(&after_msg).unwrap().params,
        toy_checkpoint(7).params
    );

    feedback(&app, &id, json!({"select": 1})).await;
    let trained = dir.path().join("trained.nca");
    let body = json!({"action": "save", "path": trained, "sessionId": id}).to_string();
    call(&app, "POST", "/api/checkpoint", Some(&body)).await;
    let t = Checkpoint::load(&trained).unwrap();
    assert_ne!(t.params, toy_checkpoint(7).params);
    assert_eq!(t.provenance.online_updates, 1);
    assert!(t.adam.is_some());

    let body = json!({"action": "load", "path": trained}).to_string();
    let (s, v) = call(&app, "POST", "/api/checkpoint", Some(&body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "loaded");

    let body = json!({"action": "load", "path": dir.path().join("missing.nca")}).to_string();
    let (s, e) = call(&app, "POST", "/api/checkpoint", Some(&body)).await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");
    let (s, e) = call(
        &app,
        "POST",
        "/api/checkpoint",
        Some(r#"{"action": "drop", "path": "x"}"#),
    )
    .await;
    assert_api_error(s, &e, StatusCode::BAD_REQUEST, "bad_request");

    let empty = router(AppState::new(None, ServerOptions::default()));
    let body = json!({"action": "save", "path": base}).to_string();
    let (s, e) = call(&empty, "POST", "/api/checkpoint", Some(&body)).await;
    assert_api_error(s, &e, StatusCode::CONFLICT, "conflict");
}

pub async fn unknown_routes_and_methods() {
    let app = app();
    let (s, e) = call(&app, "GET", "/api/nothing", None).await;
    assert_api_error(s, &e, StatusCode::NOT_FOUND, "not_found");
    let (s, e) = call(&app, "GET", "/api/session", None).await;
    assert_api_error(s, &e, StatusCode::METHOD_NOT_ALLOWED, "bad_request");
}

pub async fn sessions_are_isolated() {
    let app = app();
    let a = new_session(&app, None).await;
    let b = new_session(&app, None).await;
    send(&app, &a, "hello my friend").await;
    feedback(&app, &a, json!({"select": 1})).await;
    let (_, tb) = call(&app, "GET", &format!("/api/session/{b}/transcript"), None).await;
    assert_eq!(tb, json!([]));
    let (s, _) = feedback(&app, &b, json!({"skip": true})).await;
    assert_eq!(s, StatusCode::CONFLICT);
}
