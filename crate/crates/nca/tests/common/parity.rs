//! One scripted conversation driven through the terminal loop and the HTTP
//! API, then compared.

use std::path::Path;
use std::sync::Arc;

use axum::http::StatusCode;
use nca::chat::{self, ChatOptions};
use nca::checkpoint::Checkpoint;
use nca::log::{read_log, replay, LogWriter};
use nca::server::{router, session_log_path, AppState, ServerOptions};
use nca_core::{ConfigPatch, Feedback, Session, SessionConfig};
use serde_json::{json, Value};

use super::{call, toy_checkpoint};

const CLOCK: u64 = 1_600_000_000;

/// (message, feedback line, config change applied before the message)
pub const SCRIPT: [(&str, &str, Option<f64>); 6] = [
    ("hello my friend", "2", None),
    ("what is your name ?", "i am a bot .", None),
    ("i don't want to work today .", "", Some(0.005)),
    (
        "i just want to lie in bed and have pizza .",
        "Good idea, may I join you?",
        None,
    ),
    ("hello my friend", "1", Some(0.01)),
    ("what is your name ?", "3", None),
];

pub fn config(seed: u64) -> SessionConfig {
    SessionConfig {
        seed,
        ..SessionConfig::default()
    }
}

/// Runs the script through the terminal loop, one `chat::run` per config
/// segment. Returns the final session.
pub fn run_terminal(seed: u64, log: &Path) -> Session {
    let ckpt = toy_checkpoint(seed);
    let mut session = Session::new("terminal", ckpt.params, Arc::new(ckpt.vocab), config(seed))
        .with_clock(Box::new(|| CLOCK));
    let mut writer = LogWriter::open(log).unwrap();
    for (msg, fb, lr) in SCRIPT {
        if let Some(lr) = lr {
            session
                .update_config(&ConfigPatch {
                    lr: Some(lr),
                    ..ConfigPatch::default()
                })
                .unwrap();
        }
        let input = format!("{msg}\n{fb}\n");
        let mut out = Vec::new();
        chat::run(
            &mut session,
            input.as_bytes(),
            &mut out,
            Some(&mut writer),
            ChatOptions::default(),
        )
        .unwrap();
    }
    assert_eq!(
        session.turns(),
        SCRIPT.len(),
        "a scripted selection was rejected"
    );
    session
}

fn http_feedback(line: &str) -> Value {
    match Feedback::parse(line) {
        Feedback::Select(k) => json!({ "select": k }),
        Feedback::Text(t) => json!({ "text": t }),
        Feedback::Skip => json!({ "skip": true }),
    }
}

/// Runs the script over HTTP. Returns the transcript and the session's
/// saved checkpoint.
pub async fn run_http(seed: u64, dir: &Path) -> (Value, Checkpoint) {
    let opts = ServerOptions {
        log: Some(dir.join("http.jsonl")),
        defaults: config(seed),
        clock: Arc::new(|| CLOCK),
    };
    let app = router(AppState::new(Some(toy_checkpoint(seed)), opts));
    let (_, v) = call(&app, "POST", "/api/session", None).await;
    let id = v["sessionId"].as_str().unwrap().to_owned();
    for (msg, fb, lr) in SCRIPT {
        if let Some(lr) = lr {
            let body = json!({ "lr": lr }).to_string();
            let (s, v) = call(
                &app,
                "PATCH",
                &format!("/api/session/{id}/config"),
                Some(&body),
            )
            .await;
            assert_eq!(s, StatusCode::OK, "{v}");
        }
        let body = json!({ "text": msg }).to_string();
        let (s, v) = call(
            &app,
            "POST",
            &format!("/api/session/{id}/message"),
            Some(&body),
        )
        .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        let body = http_feedback(fb).to_string();
        let (s, v) = call(
            &app,
            "POST",
            &format!("/api/session/{id}/feedback"),
            Some(&body),
        )
        .await;
        assert_eq!(s, StatusCode::OK, "{v}");
    }
    let (_, transcript) = call(&app, "GET", &format!("/api/session/{id}/transcript"), None).await;
    let path = dir.join("http.nca");
    let body = json!({"action": "save", "path": path, "sessionId": id}).to_string();
    let (s, v) = call(&app, "POST", "/api/checkpoint", Some(&body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    (transcript, Checkpoint::load(&path).unwrap())
}

/// Terminal and HTTP paths agree on transcript, log bytes and final weights.
pub async fn check_parity(seed: u64) {
    let dir = tempfile::tempdir().unwrap();
    let term_log = dir.path().join("terminal.jsonl");
    let session = run_terminal(seed, &term_log);
    let (transcript, ckpt) = run_http(seed, dir.path()).await;

    assert_eq!(
        transcript,
        serde_json::to_value(session.transcript()).unwrap()
    );
    assert_eq!(transcript.as_array().unwrap().len(), SCRIPT.len());
    assert_eq!(&ckpt.params, session.params());
    assert_eq!(ckpt.adam.as_ref(), Some(session.adam()));
    let http_log = session_log_path(&dir.path().join("http.jsonl"), "s1");
    assert_eq!(
        std::fs::read(&term_log).unwrap(),
        std::fs::read(http_log).unwrap()
    );
}

/// Replaying a live session's log from the starting weights reproduces the
/// final weights bit for bit.
pub fn check_replay(seed: u64) {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("live.jsonl");
    let session = run_terminal(seed, &log);
    assert_eq!(read_log(&log).unwrap().as_slice(), session.transcript());

    let start = toy_checkpoint(seed);
    let mut params = start.params.clone();
    replay(&mut params, &start.vocab, &log, None).unwrap();
    assert_ne!(params, start.params);
    for (a, b) in params.tensors().iter().zip(session.params().tensors()) {
        let bits = |t: &nca_core::Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}
