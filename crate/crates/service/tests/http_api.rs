use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use partgrasp::perception::{ChatBackend, ScriptedBackend};
use partgrasp::scene::catalog::desktop_scene;
use partgrasp_service::server::{router, AppState};
use partgrasp_service::PipelineConfig;
use serde_json::{json, Value};
use tower::ServiceExt;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");

fn mock() -> Arc<dyn ChatBackend> {
    Arc::new(ScriptedBackend::load(format!("{FIXTURES}/mock_dialogues.json")).unwrap())
}

fn app_with(backend: Arc<dyn ChatBackend>) -> Router {
    router(AppState::new(backend, PipelineConfig::default()))
}

fn app() -> Router {
    app_with(mock())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, Option<String>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, ctype)
}

async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes, _) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn scene_json() -> Value {
    serde_json::to_value(desktop_scene::<f64>()).unwrap()
}

async fn create(app: &Router) -> String {
    let (status, v) = call_json(app, Method::POST, "/sessions", Some(json!({"scene": scene_json(), "seed": 3}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn say(app: &Router, id: &str, text: &str) -> (StatusCode, Value) {
    call_json(app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({ "text": text }))).await
}

#[tokio::test]
async fn healthz() {
    let (status, v) = call_json(&app(), Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn create_session_lists_inventory() {
    let app = app();
    let (status, v) = call_json(&app, Method::POST, "/sessions", Some(json!({"scene": scene_json()}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["state"], "dialogue");
    assert_eq!(v["cursor"], 0);
    assert_eq!(v["inventory"].as_array().unwrap().len(), 5);
    assert_eq!(v["intrinsics"]["width"], 640);
    let id = v["id"].as_str().unwrap();
    let (status, got) = call_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got, v);
}

#[tokio::test]
async fn malformed_bodies_name_the_field() {
    let app = app();
    let mut scene = scene_json();
    scene.as_object_mut().unwrap().remove("camera");
    let (status, v) = call_json(&app, Method::POST, "/sessions", Some(json!({ "scene": scene }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["field"], "scene.camera");

    let mut scene = scene_json();
    scene["seed"] = json!("seven");
    let (status, v) = call_json(&app, Method::POST, "/sessions", Some(json!({ "scene": scene }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["field"], "scene.seed");

    let (status, v) = call_json(&app, Method::POST, "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["field"], "scene");

    let (status, _, _) = call(&app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let id = create(&app).await;
    let (status, v) = call_json(&app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({"txt": "hi"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "invalid_field");
}

#[tokio::test]
async fn invalid_scene_is_422() {
    let mut scene = scene_json();
    scene["background"] = json!([]);
    let (status, v) = call_json(&app(), Method::POST, "/sessions", Some(json!({ "scene": scene }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "invalid_scene");
}

#[tokio::test]
async fn same_scene_twice_gives_distinct_ids_and_identical_frames() {
    let app = app();
    let (a, b) = (create(&app).await, create(&app).await);
    assert_ne!(a, b);
    let (sa, fa, ct) = call(&app, Method::GET, &format!("/sessions/{a}/frame"), None).await;
    let (_, fb, _) = call(&app, Method::GET, &format!("/sessions/{b}/frame"), None).await;
    assert_eq!(sa, StatusCode::OK);
    assert_eq!(ct.as_deref(), Some("image/png"));
    assert_eq!(&fa[..8], b"\x89PNG\r\n\x1a\n");
    assert_eq!(fa, fb);
}

#[tokio::test]
async fn thirsty_dialogue_to_done() {
    let app = app();
    let id = create(&app).await;

    let (status, v) = say(&app, &id, "I am a bit thirsty.").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["kind"], "reply");
    assert_eq!(v["state"], "dialogue");
    assert!(v["text"].as_str().unwrap().contains("cup"));

    let (_, v) = say(&app, &id, "Yes, the cup please.").await;
    assert_eq!(v["kind"], "reply");

    let (status, v) = say(&app, &id, "Confirm execution").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["kind"], "sequence");
    assert_eq!(v["state"], "sequence_ready");
    let steps = v["sequence"]["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 2);
    assert_eq!((steps[0]["action"].as_str(), steps[0]["target"]["object"].as_str()), (Some("grasp"), Some("cup")));
    assert_eq!(steps[1]["action"], "handover");

    let (status, v) = say(&app, &id, "one more thing").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "invalid_state");

    let (status, _) = call_json(&app, Method::GET, &format!("/sessions/{id}/grasps/1"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, v) = call_json(&app, Method::POST, &format!("/sessions/{id}/steps/next"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["state"], "executing");
    assert_eq!(v["cursor"], 1);
    let step = &v["step"];
    assert!(step.get("failure").is_none());
    assert!(step["roi"]["context_points"].as_u64().unwrap() > 0);
    for c in step["contact_labels"].as_array().unwrap() {
        assert_eq!((c["object"].as_str(), c["part"].as_str()), (Some("cup"), Some("body")));
    }

    // the echoed pixel is the projection of the top-1 translation
    let (_, session) = call_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let (_, g) = call_json(&app, Method::GET, &format!("/sessions/{id}/grasps/1"), None).await;
    let k = &session["intrinsics"];
    let t: Vec<f64> = g["grasps"][0]["translation"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let u = k["fx"].as_f64().unwrap() * t[0] / t[2] + k["cx"].as_f64().unwrap();
    let v_px = k["fy"].as_f64().unwrap() * t[1] / t[2] + k["cy"].as_f64().unwrap();
    let echoed = &g["top1_pixel"];
    assert!((u - echoed[0].as_f64().unwrap()).abs() < 1e-9);
    assert!((v_px - echoed[1].as_f64().unwrap()).abs() < 1e-9);
    assert!(g["grasps"].as_array().unwrap().len() <= 15);

    let mut masks = Vec::new();
    for layer in ["target", "expanded", "ring"] {
        let (status, bytes, ct) = call(&app, Method::GET, &format!("/sessions/{id}/masks/1?layer={layer}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(ct.as_deref(), Some("image/png"));
        masks.push(bytes);
    }
    assert_ne!(masks[0], masks[1]);
    let (status, _, _) = call(&app, Method::GET, &format!("/sessions/{id}/masks/1?layer=halo"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, v) = call_json(&app, Method::POST, &format!("/sessions/{id}/steps/next"), None).await;
    assert_eq!(v["state"], "done");
    let ann = &v["step"]["annotation"];
    assert_eq!((ann["action"].as_str(), ann["held_part"].as_str()), (Some("handover"), Some("body")));
    assert_eq!(ann["grasp"], g["grasps"][0]);
    let (status, _, _) = call(&app, Method::GET, &format!("/sessions/{id}/masks/2"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, v) = call_json(&app, Method::POST, &format!("/sessions/{id}/steps/next"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"]["details"]["state"], "done");

    let (_, session) = call_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(session["transcript"].as_array().unwrap().len(), 3);
    assert_eq!(session["steps"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn steps_before_confirmation_conflict() {
    let app = app();
    let id = create(&app).await;
    let (status, v) = call_json(&app, Method::POST, &format!("/sessions/{id}/steps/next"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"]["details"]["state"], "dialogue");
}

#[tokio::test]
async fn absent_object_fails_the_session() {
    let script = json!([{"match": {"instruction_regex": "(?i)confirm"}, "replies": [
        r#"{"task_description":"x","steps":[{"index":1,"action":"grasp","target":{"object":"vase"}}]}"#
    ]}]);
    let app = app_with(Arc::new(ScriptedBackend::from_json(&script.to_string()).unwrap()));
    let id = create(&app).await;
    let (_, v) = say(&app, &id, "Confirm execution").await;
    assert_eq!(v["state"], "sequence_ready");
    let (status, v) = call_json(&app, Method::POST, &format!("/sessions/{id}/steps/next"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["state"], "failed");
    assert_eq!(v["step"]["failure"]["code"], "empty_mask");
    let (status, _) = call_json(&app, Method::POST, &format!("/sessions/{id}/steps/next"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn backend_failures_leave_state_unchanged() {
    let script = json!([{"match": {"instruction_regex": "(?i)confirm"}, "replies": ["no json here"]}]);
    let app = app_with(Arc::new(ScriptedBackend::from_json(&script.to_string()).unwrap()));
    let id = create(&app).await;

    let (status, v) = say(&app, &id, "hello").await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"]["code"], "backend_no_match");

    let (status, v) = say(&app, &id, "Confirm execution").await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"]["code"], "malformed_output");
    let attempts = v["error"]["details"]["attempts"].as_array().unwrap();
    assert_eq!(attempts.len(), 3);
    assert_eq!(attempts[0]["error"]["diagnostics"][0]["code"], "invalid_json");

    let (_, session) = call_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(session["state"], "dialogue");
    assert_eq!(session["transcript"], json!([]));
}

#[tokio::test]
async fn unknown_session_is_404() {
    let (status, v) = call_json(&app(), Method::GET, "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "unknown_session");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_messages_are_serialized() {
    let app = app();
    let id = create(&app).await;
    let (a, b) = tokio::join!(say(&app, &id, "I am a bit thirsty."), say(&app, &id, "I am a bit thirsty."));
    assert_eq!((a.0, b.0), (StatusCode::OK, StatusCode::OK));
    let (_, session) = call_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(session["transcript"].as_array().unwrap().len(), 2);
}
