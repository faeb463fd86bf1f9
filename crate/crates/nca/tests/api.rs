mod common;

use common::golden;

#[tokio::test]
async fn create_session_shapes() {
    golden::create_session_shapes().await;
}

#[tokio::test]
async fn create_session_without_model_conflicts() {
    golden::create_session_without_model_conflicts().await;
}

#[tokio::test]
async fn message_shapes() {
    golden::message_shapes().await;
}

#[tokio::test]
async fn message_errors() {
    golden::message_errors().await;
}

#[tokio::test]
async fn feedback_shapes() {
    golden::feedback_shapes().await;
}

#[tokio::test]
async fn feedback_errors() {
    golden::feedback_errors().await;
}

#[tokio::test]
async fn transcript_and_config() {
    golden::transcript_and_config().await;
}

#[tokio::test]
async fn checkpoint_save_and_load() {
    golden::checkpoint_save_and_load().await;
}

#[tokio::test]
async fn unknown_routes_and_methods() {
    golden::unknown_routes_and_methods().await;
}

#[tokio::test]
async fn sessions_are_isolated() {
    golden::sessions_are_isolated().await;
}
