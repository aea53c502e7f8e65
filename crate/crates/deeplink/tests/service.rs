mod common;

use std::process::Command;
use std::sync::Arc;

use axum::http::{Method, StatusCode};
use axum::Router;
use common::{call, corpus_text};
use deeplink::service::{router, AppState};

fn app() -> Router {
    router(Arc::new(AppState::new(Some(common::corpus_dir()))))
}

async fn session(app: &Router, model: &str) -> String {
    let reply = call(app, Method::POST, "/sessions", corpus_text(model)).await;
    assert_eq!(reply.status, StatusCode::CREATED, "{}", reply.body);
    reply.json()["id"].as_str().unwrap().to_string()
}

fn cli(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_deeplink")).args(args).output().unwrap();
    assert!(out.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[tokio::test]
async fn create_session_returns_201() {
    let app = app();
    let reply = call(&app, Method::POST, "/sessions", corpus_text("anki")).await;
    assert_eq!(reply.status, StatusCode::CREATED);
    let body = reply.json();
    assert_eq!(body["packageName"], "com.ichi2.anki");
    assert_eq!(body["activities"], serde_json::json!(["DeckPicker", "NoteEditor", "CardTemplateEditor"]));
    let id = body["id"].as_str().unwrap();
    let status = call(&app, Method::GET, &format!("/sessions/{id}"), "").await.json();
    assert_eq!(status["analyzed"], false);

    let other = session(&app, "anki").await;
    assert_ne!(other, id);
}

#[tokio::test]
async fn invalid_models_are_400_with_the_error_envelope() {
    let app = app();
    let reply = call(&app, Method::POST, "/sessions", "{").await;
    assert_eq!(reply.status, StatusCode::BAD_REQUEST);
    let body = reply.json();
    assert_eq!(body["code"], "FormatError");
    assert!(body["message"].as_str().unwrap().contains("malformed app model"));
    assert!(body.get("detail").is_some());

    let broken = corpus_text("motivating").replace("\"showScreen\": \"child\"", "\"showScreen\": \"nope\"");
    let reply = call(&app, Method::POST, "/sessions", broken).await;
    assert_eq!(reply.status, StatusCode::BAD_REQUEST);
    assert_eq!(reply.json()["code"], "UnknownScreen");
}

#[tokio::test]
async fn out_of_order_steps_are_409() {
    let app = app();
    let id = session(&app, "anki").await;
    for (method, path, body) in [
        (Method::POST, format!("/sessions/{id}/activities/NoteEditor/crawl"), ""),
        (Method::GET, format!("/sessions/{id}/navgraph"), ""),
        (Method::GET, format!("/sessions/{id}/activities/NoteEditor/shortcuts"), ""),
        (Method::GET, format!("/sessions/{id}/activities/NoteEditor/ftg"), ""),
        (Method::PUT, format!("/sessions/{id}/selection"), "{\"targets\": []}"),
        (Method::POST, format!("/sessions/{id}/manifest"), ""),
        (Method::GET, format!("/sessions/{id}/manifest"), ""),
        (Method::POST, format!("/sessions/{id}/replay"), "{\"uri\": \"http://anki.ichi2.com/DeckPicker\"}"),
    ] {
        let reply = call(&app, method.clone(), &path, body).await;
        assert_eq!(reply.status, StatusCode::CONFLICT, "{method} {path}: {}", reply.body);
        assert_eq!(reply.json()["code"], "StepOrder");
    }
    assert_eq!(call(&app, Method::POST, &format!("/sessions/{id}/analyze"), "").await.status, StatusCode::OK);
    let reply = call(&app, Method::POST, &format!("/sessions/{id}/manifest"), "").await;
    assert_eq!(reply.status, StatusCode::CONFLICT);
    let selection = r#"{"targets": [{"activity": "NoteEditor", "fragment": "tags"}]}"#;
    assert_eq!(call(&app, Method::PUT, &format!("/sessions/{id}/selection"), selection).await.status, StatusCode::OK);
    let reply = call(&app, Method::POST, &format!("/sessions/{id}/manifest"), "").await;
    assert_eq!(reply.status, StatusCode::CONFLICT);
    assert_eq!(reply.json()["code"], "NotCrawled");
}

#[tokio::test]
async fn unknown_things_are_404() {
    let app = app();
    assert_eq!(call(&app, Method::GET, "/sessions/nope/navgraph", "").await.status, StatusCode::NOT_FOUND);
    let id = session(&app, "anki").await;
    call(&app, Method::POST, &format!("/sessions/{id}/analyze"), "").await;
    let reply = call(&app, Method::GET, &format!("/sessions/{id}/activities/Nope/shortcuts"), "").await;
    assert_eq!(reply.status, StatusCode::NOT_FOUND);
    assert_eq!(reply.json()["code"], "UnknownActivity");
    assert_eq!(call(&app, Method::GET, &format!("/sessions/{id}/trace/0"), "").await.status, StatusCode::NOT_FOUND);
    let reply = call(&app, Method::POST, "/sessions?corpus=missing", "").await;
    assert_eq!(reply.status, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::DELETE, &format!("/sessions/{id}"), "").await.status, StatusCode::NO_CONTENT);
    assert_eq!(call(&app, Method::GET, &format!("/sessions/{id}"), "").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn anki_workflow_reaches_the_tags_fragment() {
    let app = app();
    let reply = call(&app, Method::POST, "/sessions?corpus=anki", "").await;
    assert_eq!(reply.status, StatusCode::CREATED);
    let id = reply.json()["id"].as_str().unwrap().to_string();
    let base = format!("/sessions/{id}");

    call(&app, Method::POST, &format!("{base}/analyze"), "").await;
    let shortcuts = call(&app, Method::GET, &format!("{base}/activities/CardTemplateEditor/shortcuts"), "").await.json();
    assert_eq!(shortcuts["unique"][0]["parameters"].as_array().unwrap().len(), 2);

    let entry = call(&app, Method::GET, &format!("{base}/activities/NoteEditor/entry"), "").await;
    let ftg = call(&app, Method::POST, &format!("{base}/activities/NoteEditor/crawl"), entry.body).await.json();
    let names: Vec<&str> = ftg["vertices"].as_array().unwrap().iter().map(|v| v["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["root", "tags"]);
    let dot = call(&app, Method::GET, &format!("{base}/activities/NoteEditor/ftg?format=dot"), "").await;
    assert!(dot.body.contains("CardEditorTagButton"));

    let selection = r#"{"targets": [{"activity": "NoteEditor", "fragment": "tags"}, {"activity": "CardTemplateEditor"}]}"#;
    call(&app, Method::PUT, &format!("{base}/selection"), selection).await;
    let manifest = call(&app, Method::POST, &format!("{base}/manifest"), "").await.json();
    assert_eq!(manifest["templates"][0]["uriSchema"]["fragment"], "tags");

    let reply = call(
        &app,
        Method::POST,
        &format!("{base}/replay"),
        r#"{"uri": "http://anki.ichi2.com/NoteEditor?CALLER=3#tags"}"#,
    )
    .await;
    assert_eq!(reply.status, StatusCode::OK);
    assert_eq!(reply.headers["location"], format!("{base}/trace/0"));
    let trace = reply.json();
    assert_eq!(trace["verdict"]["verdict"], "reachedFragment");
    assert_eq!(call(&app, Method::GET, &format!("{base}/trace/0"), "").await.json(), trace);

    let bad = call(&app, Method::POST, &format!("{base}/replay"), r#"{"uri": "http://anki.ichi2.com/NoteEditor?CALLER=x#tags"}"#).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad.json()["code"], "TypeMismatch");

    let jsonl = call(&app, Method::GET, &format!("{base}/traces"), "").await;
    assert_eq!(jsonl.body.lines().count(), 1);
    let snapshot = call(&app, Method::GET, &format!("{base}/snapshot"), "").await.json();
    assert_eq!(snapshot["traces"].as_array().unwrap().len(), 1);
    assert_eq!(snapshot["manifest"], manifest);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let a = session(&app, "anki").await;
    let b = session(&app, "anki").await;
    call(&app, Method::POST, &format!("/sessions/{a}/analyze"), "").await;
    assert_eq!(call(&app, Method::GET, &format!("/sessions/{a}/navgraph"), "").await.status, StatusCode::OK);
    assert_eq!(call(&app, Method::GET, &format!("/sessions/{b}/navgraph"), "").await.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn simulate_steps_through_an_entry_script() {
    let app = app();
    let id = session(&app, "motivating").await;
    let script = r#"{"actions": ["button2"]}"#;
    let view = call(&app, Method::POST, &format!("/sessions/{id}/simulate"), script).await.json();
    assert_eq!(view["screen"], "child");
    assert!(view["error"].is_null());
    let to_b = serde_json::json!({"intents": [{"intent": {"target": "B", "labels": [{"kind": "extra", "name": "foo", "type": "int"}]}, "values": {"foo": "1"}}]});
    let view = call(&app, Method::POST, &format!("/sessions/{id}/simulate"), to_b.to_string()).await.json();
    assert_eq!(view["error"]["code"], "unsetDependency");
    assert_eq!(view["activity"], "Main");
}

#[tokio::test]
async fn http_artifacts_are_byte_identical_to_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).display().to_string();
    let model = common::corpus_path("shop").display().to_string();
    let app = app();
    let id = session(&app, "shop").await;
    let base = format!("/sessions/{id}");

    let http_report = call(&app, Method::POST, &format!("{base}/analyze"), "").await.body;
    assert_eq!(http_report, cli(&["analyze", &model]));

    let http_ftg = call(&app, Method::POST, &format!("{base}/activities/Product/crawl?crossEdges=true"), "").await.body;
    assert_eq!(http_ftg, cli(&["crawl", &model, "--activity", "Product", "--cross-edges"]));
    std::fs::write(p("product.ftg.json"), &http_ftg).unwrap();

    let selection = r#"{"targets": [{"activity": "Product"}, {"activity": "Product", "fragment": "reviews"}, {"activity": "Orders", "pinned": {"order_id": "12"}}]}"#;
    std::fs::write(p("selection.json"), selection).unwrap();
    call(&app, Method::PUT, &format!("{base}/selection"), selection).await;
    let http_manifest = call(&app, Method::POST, &format!("{base}/manifest"), "").await.body;
    let cli_manifest = cli(&["link", &model, "--select", &p("selection.json"), "--ftg", &p("product.ftg.json")]);
    assert_eq!(http_manifest, cli_manifest);
    std::fs::write(p("manifest.json"), &cli_manifest).unwrap();

    for uri in ["http://shop.example.com/Product?product_id=9&query=boots#reviews", "http://shop.example.com/Orders"] {
        let body = serde_json::json!({ "uri": uri }).to_string();
        let http_trace = call(&app, Method::POST, &format!("{base}/replay"), body).await.body;
        assert_eq!(http_trace, cli(&["replay", &model, &p("manifest.json"), uri]));
    }

    let reply = call(&app, Method::PUT, &format!("{base}/manifest"), cli_manifest.clone()).await;
    assert_eq!(reply.status, StatusCode::OK);
    assert_eq!(reply.body, cli_manifest);
    let navgraph = call(&app, Method::GET, &format!("{base}/navgraph?format=dot"), "").await;
    assert!(navgraph.body.starts_with("digraph navgraph"));
}

#[tokio::test]
async fn corpus_listing() {
    let app = app();
    let names = call(&app, Method::GET, "/corpus", "").await.json();
    assert_eq!(names.as_array().unwrap().len(), common::CORPUS.len());
    let bare = router(Arc::new(AppState::new(None)));
    assert_eq!(call(&bare, Method::GET, "/corpus", "").await.json(), serde_json::json!([]));
    assert_eq!(call(&bare, Method::POST, "/sessions?corpus=anki", "").await.status, StatusCode::NOT_FOUND);
}
