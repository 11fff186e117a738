mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::Engine as _;
use common::tone_with_clicks;
use ddsp_sfx::audio::{decode_wav, encode_wav};
use ddsp_sfx::server::{router, serve, AnalyzeResponse, AppState, Health, ModelInfo};
use ddsp_sfx_core::model::{Model, ParamStore};
use ddsp_sfx_core::{AudioClip, FrameConfig};
use http_body_util::BodyExt;
use std::io::Cursor;
use tower::ServiceExt;

fn state() -> AppState {
    let cfg = common::tiny_run(1).model;
    let params = ParamStore::init(&cfg, 3).unwrap();
    AppState::new(Model::new(cfg, FrameConfig::default(), params).unwrap(), 17)
}

fn guide_wav() -> Vec<u8> {
    let clip = AudioClip::new(tone_with_clicks(16_000, 4.0, 440.0), 16_000).unwrap();
    encode_wav(&clip).unwrap()
}

async fn call(app: axum::Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_json(uri: &str, value: serde_json::Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(value.to_string()))
        .unwrap()
}

#[tokio::test]
async fn health_and_model_info() {
    let app = router(state(), None);
    let (status, body) = call(app.clone(), get("/health")).await;
    assert_eq!(status, StatusCode::OK);
    let health: Health = serde_json::from_slice(&body).unwrap();
    assert_eq!(health.status, "ok");
    assert_eq!(health.version, env!("CARGO_PKG_VERSION"));

    let (status, body) = call(app, get("/model")).await;
    assert_eq!(status, StatusCode::OK);
    let info: ModelInfo = serde_json::from_slice(&body).unwrap();
    assert_eq!(info.frame.frame_count, 400);
    assert_eq!(info.step, 17);
    assert_eq!(info.z_limit, 3.0);
    assert_eq!(info.model.hidden_units, 8);
}

#[tokio::test]
async fn analyze_returns_frame_vectors() {
    let app = router(state(), None);
    let req = Request::post("/analyze").body(Body::from(guide_wav())).unwrap();
    let (status, body) = call(app.clone(), req).await;
    assert_eq!(status, StatusCode::OK);
    let value: serde_json::Value = serde_json::from_slice(&body).unwrap();
    for key in ["f0", "loudness", "onset", "harmonic", "confidence", "z"] {
        assert_eq!(value[key].as_array().unwrap().len(), 400, "{key}");
    }
    let parsed: AnalyzeResponse = serde_json::from_value(value).unwrap();
    assert_eq!(parsed.frames, 400);

    let bad = Request::post("/analyze").body(Body::from("nonsense")).unwrap();
    let (status, body) = call(app, bad).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert!(err["error"].as_str().unwrap().contains("wav"));
}

#[tokio::test]
async fn synthesize_from_audio_and_from_features() {
    let app = router(state(), None);
    let b64 = base64::engine::general_purpose::STANDARD.encode(guide_wav());
    let req = post_json(
        "/synthesize",
        serde_json::json!({ "wav_base64": b64, "z_mode": "constant", "z_value": 0.5, "seed": 2 }),
    );
    let (status, wav) = call(app.clone(), req).await;
    assert_eq!(status, StatusCode::OK);
    let decoded = decode_wav(Cursor::new(&wav)).unwrap();
    assert_eq!((decoded.samples.len(), decoded.sample_rate, decoded.channels), (64_000, 16_000, 1));

    // same request twice, same bytes
    let again = post_json(
        "/synthesize",
        serde_json::json!({ "wav_base64": b64, "z_mode": "constant", "z_value": 0.5, "seed": 2 }),
    );
    assert_eq!(call(app.clone(), again).await.1, wav);

    let analyzed = Request::post("/analyze").body(Body::from(guide_wav())).unwrap();
    let (_, body) = call(app.clone(), analyzed).await;
    let mut features: serde_json::Value = serde_json::from_slice(&body).unwrap();
    let obj = features.as_object_mut().unwrap();
    for k in ["frames", "sample_rate", "confidence"] {
        obj.remove(k);
    }
    let ramp: Vec<f64> = (0..400).map(|i| -4.0 + 8.0 * i as f64 / 399.0).collect();
    let req = post_json(
        "/synthesize",
        serde_json::json!({ "features": features, "z_mode": "curve", "z_curve": ramp }),
    );
    let (status, wav) = call(app.clone(), req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(decode_wav(Cursor::new(&wav)).unwrap().samples.len(), 64_000);

    let req = post_json("/synthesize", serde_json::json!({ "features": features, "z_mode": "encoded" }));
    assert_eq!(call(app.clone(), req).await.0, StatusCode::OK);
}

#[tokio::test]
async fn malformed_synthesis_requests_are_rejected() {
    let app = router(state(), None);
    let b64 = base64::engine::general_purpose::STANDARD.encode(guide_wav());
    let cases = [
        serde_json::json!({ "z_mode": "constant", "z_value": 1.0 }),
        serde_json::json!({ "wav_base64": b64, "z_mode": "sideways" }),
        serde_json::json!({ "wav_base64": b64, "z_mode": "constant" }),
        serde_json::json!({ "wav_base64": b64, "z_mode": "curve", "z_curve": [0.0, 1.0] }),
        serde_json::json!({ "wav_base64": "%%%", "z_mode": "encoded" }),
    ];
    for body in cases {
        let (status, _) = call(app.clone(), post_json("/synthesize", body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    }
    let (status, _) = call(app, post_json("/synthesize", serde_json::json!({ "bogus": 1 }))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn static_bundle_is_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>ui</html>").unwrap();
    let app = router(state(), Some(dir.path().to_path_buf()));
    let (status, body) = call(app.clone(), get("/index.html")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<html>ui</html>");
    assert_eq!(call(app.clone(), get("/")).await.0, StatusCode::OK);
    assert_eq!(call(app, get("/health")).await.0, StatusCode::OK);
}

#[tokio::test]
async fn busy_port_fails_at_startup() {
    let taken = std::net::TcpListener::bind("0.0.0.0:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let err = serve(state(), port, None).await.unwrap_err();
    assert!(err.to_string().contains(&port.to_string()));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_requests_match_serial_ones() {
    let app = router(state(), None);
    let b64 = base64::engine::general_purpose::STANDARD.encode(guide_wav());
    let body = |z: f64| serde_json::json!({ "wav_base64": b64, "z_mode": "constant", "z_value": z, "seed": 4 });
    let mut serial = Vec::new();
    for z in [-1.0, 0.0, 2.0] {
        serial.push(call(app.clone(), post_json("/synthesize", body(z))).await.1);
    }
    let tasks: Vec<_> = [-1.0, 0.0, 2.0]
        .into_iter()
        .map(|z| tokio::spawn(call(app.clone(), post_json("/synthesize", body(z)))))
        .collect();
    for (task, expect) in tasks.into_iter().zip(serial) {
        assert_eq!(task.await.unwrap().1, expect);
    }
}
