use std::path::Path;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use mousesal_service::http::{prepare, router};
use mousesal_service::ServiceConfig;
use serde_json::{json, Value};
use tower::ServiceExt;

fn setup(dir: &Path) -> ServiceConfig {
    let assets = dir.join("assets");
    std::fs::create_dir_all(&assets).unwrap();
    let entries: Vec<Value> = (0..3)
        .map(|i| {
            std::fs::write(assets.join(format!("v{i}.mp4")), (0u8..=255).collect::<Vec<u8>>()).unwrap();
            json!({"video_id": format!("v{i}"), "width": 640, "height": 360, "fps": 25.0,
                   "duration_ms": 4000, "n_frames": 100, "asset_path": format!("v{i}.mp4")})
        })
        .collect();
    std::fs::write(assets.join("catalog.json"), serde_json::to_string(&entries).unwrap()).unwrap();
    ServiceConfig {
        asset_dir: assets,
        data_dir: dir.join("data"),
        secret: "s3cret".into(),
        admin_token: Some("admin".into()),
        playlist_size: 2,
        seed: Some(9),
        ..ServiceConfig::default()
    }
}

async fn call(app: &axum::Router, req: Request<Body>) -> (StatusCode, Vec<u8>, axum::http::HeaderMap) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, headers)
}

fn post(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri).header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string())).unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::test]
async fn participant_flow() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(prepare(&setup(dir.path())).unwrap());

    let (status, body, _) = call(&app, get("/api/health")).await;
    assert_eq!((status, json_of(&body)), (StatusCode::OK, json!({"status": "ok"})));

    let (status, body, _) =
        call(&app, post("/api/session", json!({"screen_width": 1440, "screen_height": 900, "measured_fps": 60.0}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let session = json_of(&body);
    let id = session["session_id"].as_str().unwrap().to_string();

    let (status, body, _) = call(&app, get(&format!("/api/session/{id}/playlist"))).await;
    assert_eq!(status, StatusCode::OK);
    let playlist = json_of(&body);
    assert_eq!(playlist["foveation"], json!({"sigma1_frac": 0.02, "sigmaw_frac": 0.2}));
    let items = playlist["playlist"].as_array().unwrap().clone();
    assert_eq!(items.len(), 2);

    let (status, body, _) = call(&app, post(&format!("/api/session/{id}/complete"), json!({}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let err = json_of(&body);
    assert_eq!(err["code"], "precondition_failed");
    assert_eq!(err["detail"]["missing_video_ids"].as_array().unwrap().len(), 2);

    for item in &items {
        let upload = json!({"video_id": item["video_id"], "client_fps_report": 55.0,
                            "samples": [{"t_ms": 0, "x": 0.5, "y": 0.5}, {"t_ms": 20, "x": 0.6, "y": 0.4}]});
        let (status, body, _) = call(&app, post(&format!("/api/session/{id}/trace"), upload)).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(json_of(&body), json!({"accepted": true, "samples_stored": 2, "duplicate": false}));
    }
    let (status, body, _) = call(&app, post(&format!("/api/session/{id}/complete"), json!({}))).await;
    assert_eq!(status, StatusCode::OK);
    let code = json_of(&body)["completion_code"].as_str().unwrap().to_string();
    assert_eq!(code.len(), 20);

    let (status, _, _) = call(&app, get("/api/export")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let req = Request::get("/api/export").header(header::AUTHORIZATION, "Bearer admin").body(Body::empty()).unwrap();
    let (status, body, _) = call(&app, req).await;
    assert_eq!(status, StatusCode::OK);
    let archive = json_of(&body);
    assert_eq!(archive["manifest"].as_array().unwrap().len(), 2);
    assert!(archive["traces"].as_str().unwrap().contains(&format!("{id} mouse 20 0.600000 0.400000")));
}

#[tokio::test]
async fn errors_have_uniform_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(prepare(&setup(dir.path())).unwrap());

    let (status, body, _) = call(&app, get("/api/session/missing/playlist")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let err = json_of(&body);
    assert_eq!(err["code"], "not_found");
    assert!(err["message"].is_string());

    let (status, body, _) = call(&app, post("/api/session", json!({"screen_width": "wide"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["code"], "validation_failed");

    let (_, body, _) =
        call(&app, post("/api/session", json!({"screen_width": 800, "screen_height": 600, "measured_fps": 60.0}))).await;
    let excluded = json_of(&body);
    assert_eq!(excluded["status"], "excluded");
    let id = excluded["session_id"].as_str().unwrap();
    let upload = json!({"video_id": "v0", "client_fps_report": 10.0, "samples": [{"t_ms": 0, "x": 0.5, "y": 0.5}]});
    let (status, body, _) = call(&app, post(&format!("/api/session/{id}/trace"), upload)).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(json_of(&body)["code"], "session_excluded");
}

#[tokio::test]
async fn video_supports_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(prepare(&setup(dir.path())).unwrap());
    let (status, body, _) = call(&app, get("/api/video/v1")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body.len(), 256);
    let req = Request::get("/api/video/v1").header(header::RANGE, "bytes=10-19").body(Body::empty()).unwrap();
    let (status, body, headers) = call(&app, req).await;
    assert_eq!(status, StatusCode::PARTIAL_CONTENT);
    assert_eq!(body, (10u8..20).collect::<Vec<u8>>());
    assert_eq!(headers[header::CONTENT_RANGE], "bytes 10-19/256");
    let (status, _, _) = call(&app, get("/api/video/zzz")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[test]
fn startup_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path());
    config.asset_dir = dir.path().join("nowhere");
    let err = prepare(&config).err().unwrap();
    assert!(err.to_string().contains("nowhere"), "{err}");

    let mut config = setup(dir.path());
    std::fs::remove_file(config.asset_dir.join("v2.mp4")).unwrap();
    assert!(prepare(&config).err().unwrap().to_string().contains("v2"));

    config.secret.clear();
    assert!(prepare(&config).is_err());
}
