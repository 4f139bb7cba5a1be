mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{blank, engine, frontal, plain_scene, rng};
use real::facedb::FaceDb;
use real::imagecore::{encode_png, GrayImage, Rect};
use real::interface::{router, AppState, ServiceConfig, ENROLL_PROMPT, SERVICE_SCHEMA};
use real::synth::Pose;

struct Service {
    state: Arc<AppState>,
    _dir: tempfile::TempDir,
}

fn service_with(target_count: usize, with_models: bool) -> Service {
    let dir = common::temp_dir();
    let cfg = ServiceConfig { target_count, ..ServiceConfig::default() };
    let db = FaceDb::open(dir.path().join("db")).unwrap();
    let state = Arc::new(AppState::new(with_models.then(engine), db, &cfg));
    Service { state, _dir: dir }
}

fn validate(def: &str, body: &Value) {
    let mut schema: Value = serde_json::from_str(SERVICE_SCHEMA).unwrap();
    schema["$ref"] = json!(format!("#/$defs/{def}"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(body).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{def} schema violations {errors:?} in {body}");
}

impl Service {
    async fn call(&self, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>, Option<String>) {
        let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
        let resp = router(self.state.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let ctype = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes, ctype)
    }

    async fn json(&self, method: &str, uri: &str, body: Vec<u8>, def: &str) -> (StatusCode, Value) {
        let (status, bytes, _) = self.call(method, uri, body).await;
        let v: Value = serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{uri}: {e}: {bytes:?}"));
        validate(if status.is_success() { def } else { "error" }, &v);
        (status, v)
    }

    async fn new_stream(&self) -> u64 {
        let (status, v) = self.json("POST", "/streams", vec![], "stream_created").await;
        assert_eq!(status, StatusCode::CREATED);
        v["stream_id"].as_u64().unwrap()
    }

    async fn frame(&self, sid: u64, img: &GrayImage) -> Value {
        let (status, v) = self.json("POST", &format!("/streams/{sid}/frames"), encode_png(img).unwrap(), "frame").await;
        assert_eq!(status, StatusCode::OK, "{v}");
        v
    }

    async fn enroll(&self, sid: u64, body: Value) -> (StatusCode, Value) {
        self.json("POST", &format!("/streams/{sid}/enroll"), body.to_string().into_bytes(), "enrollment").await
    }
}

/// Frame `i` of a clip with one face near `x`, slightly jittered.
fn clip_frame(persona: usize, x: u32, i: u64) -> GrayImage {
    let mut spec = frontal(persona);
    spec.pose = Pose::jitter(&mut rng(1000 + i), 4.0);
    plain_scene(&[(Rect::from_xywh(x + (i % 3) as u32, 60, 100, 100), spec)], i)
}

#[tokio::test]
async fn detect_endpoint() {
    let svc = service_with(5, true);
    let (status, v) = svc.json("POST", "/detect", encode_png(&blank(160, 120)).unwrap(), "observations").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!([]));

    let img = plain_scene(&[(Rect::from_xywh(100, 50, 100, 100), frontal(0))], 1);
    let (status, v) = svc.json("POST", "/detect", encode_png(&img).unwrap(), "observations").await;
    assert_eq!(status, StatusCode::OK);
    let obs = v.as_array().unwrap();
    assert_eq!(obs.len(), 1);
    assert_eq!(obs[0]["tracking_id"], Value::Null);
    assert_eq!(obs[0]["identity"]["status"], "unidentified");
    for key in ["x1", "y1", "x2", "y2"] {
        assert!(obs[0]["rect"][key].is_u64());
    }

    let (status, _) = svc.json("POST", "/detect?recognize=true", encode_png(&img).unwrap(), "observations").await;
    assert_eq!(status, StatusCode::OK);

    let mut truncated = encode_png(&img).unwrap();
    truncated.truncate(truncated.len() / 2);
    let (status, _) = svc.json("POST", "/detect", truncated, "observations").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // PGM bodies are accepted too
    let pgm = real::imagecore::encode_pgm(&img);
    let (status, v) = svc.json("POST", "/detect", pgm, "observations").await;
    assert_eq!((status, v.as_array().unwrap().len()), (StatusCode::OK, 1));
}

#[tokio::test]
async fn model_endpoints_unavailable_without_models() {
    let svc = service_with(5, false);
    let (status, _) = svc.json("POST", "/detect", encode_png(&blank(64, 64)).unwrap(), "observations").await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let sid = svc.new_stream().await;
    let (status, _) =
        svc.json("POST", &format!("/streams/{sid}/frames"), encode_png(&blank(64, 64)).unwrap(), "frame").await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, v) = svc.json("GET", "/persons", vec![], "persons").await;
    assert_eq!((status, v), (StatusCode::OK, json!([])));
}

#[tokio::test]
async fn unknown_stream_and_missing_prompt() {
    let svc = service_with(5, true);
    let (status, _) = svc.json("POST", "/streams/42/frames", encode_png(&blank(64, 64)).unwrap(), "frame").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = svc.enroll(42, json!({"accept": true})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let sid = svc.new_stream().await;
    let (status, _) = svc.enroll(sid, json!({"accept": true})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    svc.frame(sid, &blank(320, 240)).await;
    let (status, _) = svc.enroll(sid, json!({"accept": false})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = svc.json("POST", &format!("/streams/{sid}/enroll"), b"not json".to_vec(), "enrollment").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn enroll_with_name_then_recognize() {
    let svc = service_with(6, true);
    let sid = svc.new_stream().await;

    let first = svc.frame(sid, &clip_frame(0, 100, 0)).await;
    let obs = &first["observations"][0];
    assert_eq!(obs["identity"]["status"], "unidentified");
    assert_eq!(obs["prompt"], ENROLL_PROMPT);
    assert_eq!(obs["tracking_id"], 0);

    let (status, v) = svc.enroll(sid, json!({"accept": true, "name": "A"})).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    assert_eq!(v["status"], "collecting");
    assert_eq!(v["collected"], 1);

    let mut enrolled = None;
    for i in 1..20 {
        let v = svc.frame(sid, &clip_frame(0, 100, i)).await;
        assert!(v["observations"][0].get("prompt").is_none(), "no prompt while enrolling: {v}");
        if v["enrollment"]["status"] == "enrolled" {
            enrolled = Some(v["enrollment"]["person"].clone());
            break;
        }
        assert_eq!(v["enrollment"]["status"], "collecting");
    }
    let person = enrolled.expect("enrollment completes");
    assert_eq!(person["id"], 0);
    assert_eq!(person["name"], "A");
    assert_eq!(person["crop_count"], 6);

    let v = svc.frame(sid, &clip_frame(0, 100, 30)).await;
    let obs = &v["observations"][0];
    assert_eq!(obs["identity"]["status"], "recognized", "{v}");
    assert_eq!(obs["identity"]["person_id"], 0);
    assert_eq!(obs["identity"]["name"], "A");
    assert!(obs.get("prompt").is_none());

    // gallery endpoints
    let (_, list) = svc.json("GET", "/persons", vec![], "persons").await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    let (status, renamed) =
        svc.json("PUT", "/persons/0/name", json!({"name": "Zoë"}).to_string().into_bytes(), "person").await;
    assert_eq!((status, &renamed["name"]), (StatusCode::OK, &json!("Zoë")));
    let (_, list) = svc.json("GET", "/persons", vec![], "persons").await;
    assert_eq!(list[0]["name"], "Zoë");
    let (status, _) = svc.json("PUT", "/persons/9/name", json!({"name": "x"}).to_string().into_bytes(), "person").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, bytes, ctype) = svc.call("GET", "/persons/0/crops/2", vec![]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("image/png"));
    let stored = std::fs::read(svc.state.db().root().join("persons/0/crops/2.png")).unwrap();
    assert_eq!(bytes, stored);
    let (status, _, _) = svc.call("GET", "/persons/0/crops/99", vec![]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = svc.call("GET", "/persons/5/crops/0", vec![]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn enroll_without_name_reports_id() {
    let svc = service_with(4, true);
    let sid = svc.new_stream().await;
    svc.frame(sid, &clip_frame(1, 110, 0)).await;
    let (status, _) = svc.enroll(sid, json!({"accept": true})).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let mut done = false;
    for i in 1..12 {
        let v = svc.frame(sid, &clip_frame(1, 110, i)).await;
        if v["enrollment"]["status"] == "enrolled" {
            assert_eq!(v["enrollment"]["person"]["name"], Value::Null);
            done = true;
            break;
        }
    }
    assert!(done, "enrollment completes");
    let v = svc.frame(sid, &clip_frame(1, 110, 20)).await;
    let id = &v["observations"][0]["identity"];
    assert_eq!(id["status"], "recognized", "{v}");
    assert_eq!(id["person_id"], 0);
    assert_eq!(id["name"], Value::Null);
}

#[tokio::test]
async fn decline_suppresses_prompt_for_track() {
    let svc = service_with(4, true);
    let sid = svc.new_stream().await;
    let v = svc.frame(sid, &clip_frame(0, 100, 0)).await;
    assert_eq!(v["observations"][0]["prompt"], ENROLL_PROMPT);
    let (status, v) = svc.enroll(sid, json!({"accept": false, "tracking_id": 0})).await;
    assert_eq!((status, &v["status"]), (StatusCode::OK, &json!("declined")));
    for i in 1..4 {
        let v = svc.frame(sid, &clip_frame(0, 100, i)).await;
        let obs = &v["observations"][0];
        assert_eq!(obs["identity"]["status"], "unidentified");
        assert!(obs.get("prompt").is_none(), "{v}");
    }
    let (status, _) = svc.enroll(sid, json!({"accept": true})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, list) = svc.json("GET", "/persons", vec![], "persons").await;
    assert_eq!(list, json!([]));
}

#[tokio::test]
async fn two_faces_two_tracks() {
    let svc = service_with(4, true);
    let sid = svc.new_stream().await;
    let img = plain_scene(&[(Rect::from_xywh(20, 60, 90, 90), frontal(0)), (Rect::from_xywh(200, 70, 80, 80), frontal(1))], 3);
    let v = svc.frame(sid, &img).await;
    let obs = v["observations"].as_array().unwrap();
    assert_eq!(obs.len(), 2);
    assert_ne!(obs[0]["tracking_id"], obs[1]["tracking_id"]);
    assert!(obs.iter().all(|o| o["prompt"] == ENROLL_PROMPT));
}

#[tokio::test]
async fn streams_are_independent() {
    let svc = service_with(4, true);
    let (a, b) = (svc.new_stream().await, svc.new_stream().await);
    assert_ne!(a, b);
    svc.frame(a, &clip_frame(0, 100, 0)).await;
    svc.frame(a, &blank(320, 240)).await;
    let v = svc.frame(b, &clip_frame(0, 100, 0)).await;
    assert_eq!(v["frame"], 1);
    assert_eq!(v["observations"][0]["tracking_id"], 0);
}
