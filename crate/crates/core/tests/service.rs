use std::sync::OnceLock;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine as _;
use http_body_util::BodyExt;
use nmsynth::autoencoder::{
    loss_csv_path, save_weights, AutoencoderModel, LayerSpec, LossHistory,
};
use nmsynth::dsp::AudioBuffer;
use nmsynth::service::{router, LoadedModel, ServiceConfig};
use nmsynth::wav::{parse_wav, wav_bytes};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    weights: std::path::PathBuf,
}

/// Default-topology model on disk with a two-epoch loss history beside it.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let weights = dir.path().join("model.bin");
        save_weights(&AutoencoderModel::initialize(LayerSpec::default(), 4), &weights).unwrap();
        std::fs::write(
            loss_csv_path(&weights),
            "epoch,train_mse,val_mse\n1,0.002,0.001\n2,0.001,0.0005\n",
        )
        .unwrap();
        Fixture { _dir: dir, weights }
    })
}

fn app(cfg: ServiceConfig) -> Router {
    router(Some(LoadedModel::load(&fixture().weights).unwrap()), &cfg)
}

async fn call(app: Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: Router, method: &str, uri: &str, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, serde_json::to_vec(&body).unwrap()).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn single_modulator(duration: f64) -> Value {
    json!({
        "architecture": { "nodes": [ { "id": "m", "mode": "modulator", "latent": [1, 1, 1, 1, 1, 1, 1, 1] } ] },
        "duration_s": duration
    })
}

#[tokio::test]
async fn render_single_modulator() {
    let (status, body) = call_json(app(ServiceConfig::default()), "POST", "/api/render", single_modulator(1.0)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let leaves = body["leaves"].as_array().unwrap();
    assert_eq!(leaves.len(), 1);
    assert_eq!(leaves[0]["id"], "m");
    let wav = base64::engine::general_purpose::STANDARD
        .decode(leaves[0]["wav_base64"].as_str().unwrap())
        .unwrap();
    let audio = parse_wav(&wav).unwrap();
    assert_eq!(audio.len(), 48_128);
    assert_eq!(leaves[0]["samples"], 48_128);
    assert!(body["render_ms"].as_f64().unwrap() >= 0.0);
    assert!(leaves[0].get("spectrogram").is_none());
}

#[tokio::test]
async fn render_is_deterministic_and_reports_analysis() {
    let mut req = json!({
        "architecture": { "duration_s": 0.5, "nodes": [
            { "id": "m", "mode": "modulator", "latent": [2, 1, 2, 1, 2, 1, 2, 1] },
            { "id": "a", "mode": "carrier", "parent": "m", "feedback": 0.5 },
            { "id": "b", "mode": "carrier", "parent": "m", "bias": [0, 1, 0, 0, 0, 0, 0, 0] } ] },
        "include_analysis": true
    });
    let (s1, mut first) = call_json(app(ServiceConfig::default()), "POST", "/api/render", req.clone()).await;
    let (s2, mut second) = call_json(app(ServiceConfig::default()), "POST", "/api/render", req.clone()).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    first["render_ms"] = json!(0);
    second["render_ms"] = json!(0);
    assert_eq!(first, second);

    let leaves = first["leaves"].as_array().unwrap();
    let ids: Vec<_> = leaves.iter().map(|l| l["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["a", "b"]);
    for leaf in leaves {
        let spec = &leaf["spectrogram"];
        assert_eq!(spec["db"].as_array().unwrap().len(), 22);
        assert_eq!(spec["frequencies_hz"].as_array().unwrap().len(), 2049);
        let enc = leaf["encoding"]["values"].as_array().unwrap();
        assert_eq!(enc.len(), 22);
        assert!(enc.iter().all(|row| row.as_array().unwrap().len() == 8));
    }

    // Request-level duration overrides the architecture's.
    req["duration_s"] = json!(0.25);
    let (_, body) = call_json(app(ServiceConfig::default()), "POST", "/api/render", req).await;
    assert_eq!(body["duration_s"], 0.25);
}

#[tokio::test]
async fn render_rejections() {
    let (status, body) = call_json(app(ServiceConfig::default()), "POST", "/api/render", single_modulator(10_000.0)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE, "{body}");

    let no_root = json!({ "duration_s": 1, "architecture": { "nodes": [
        { "id": "a", "mode": "carrier", "parent": "b" },
        { "id": "b", "mode": "carrier", "parent": "a" } ] } });
    let (status, body) = call_json(app(ServiceConfig::default()), "POST", "/api/render", no_root).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "invalid_architecture");
    assert_eq!(body["nodes"], json!(["a", "b"]));
    assert!(body["message"].as_str().unwrap().contains("no root"));

    let bad_field = json!({ "duration_s": 1, "architecture": { "nodes": [
        { "id": "m", "mode": "modulator", "latent": [1, 1, 1, 1, 1, 1, 1, 1], "volume": 3 } ] } });
    let (status, body) = call_json(app(ServiceConfig::default()), "POST", "/api/render", bad_field).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!((body["node"].as_str(), body["field"].as_str()), (Some("m"), Some("volume")));

    let mut extra = single_modulator(1.0);
    extra["stream"] = json!(true);
    let (status, body) = call_json(app(ServiceConfig::default()), "POST", "/api/render", extra).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["field"], "stream");

    let (status, _) = call(app(ServiceConfig::default()), "POST", "/api/render", b"{not json".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn busy_render_slots_answer_429() {
    let app = app(ServiceConfig { max_concurrent_renders: 1, ..ServiceConfig::default() });
    let (a, b) = tokio::join!(
        call_json(app.clone(), "POST", "/api/render", single_modulator(3.0)),
        call_json(app.clone(), "POST", "/api/render", single_modulator(3.0)),
    );
    let mut statuses = [a.0, b.0];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::TOO_MANY_REQUESTS]);
    // The slot is released once the render finishes.
    let (status, _) = call_json(app, "POST", "/api/render", single_modulator(0.1)).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn model_info() {
    let (status, first) = call_json(app(ServiceConfig::default()), "GET", "/api/model", Value::Null).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        first["layer_sizes"],
        json!([1000, 512, 256, 128, 64, 32, 16, 8, 16, 32, 64, 128, 256, 512, 2049])
    );
    let file_hash: String = Sha256::digest(std::fs::read(&fixture().weights).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    assert_eq!(first["weights_sha256"], file_hash);
    assert_eq!(first["loss"]["epochs"], 2);
    assert_eq!(first["loss"]["final_val_mse"], 0.0005);
    let (_, second) = call_json(app(ServiceConfig::default()), "GET", "/api/model", Value::Null).await;
    assert_eq!(first, second);
    let history = LossHistory::from_csv(&std::fs::read_to_string(loss_csv_path(&fixture().weights)).unwrap()).unwrap();
    assert_eq!(history.epochs.len(), 2);
}

#[tokio::test]
async fn encode_wav_bodies() {
    let silence = wav_bytes(&AudioBuffer::silence(3 * 4096));
    let (status, bytes) = call(app(ServiceConfig::default()), "POST", "/api/encode", silence).await;
    assert_eq!(status, StatusCode::OK);
    let body: Value = serde_json::from_slice(&bytes).unwrap();
    let rows = body["values"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r == &rows[0] && r.as_array().unwrap().len() == 8));

    let (status, bytes) = call(app(ServiceConfig::default()), "POST", "/api/encode", b"RIFF....garbage".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(body["error"], "invalid_wav");
}

#[tokio::test]
async fn without_a_model_everything_is_503() {
    let app = router(None, &ServiceConfig::default());
    let (s, _) = call_json(app.clone(), "POST", "/api/render", single_modulator(1.0)).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    let (s, _) = call_json(app.clone(), "GET", "/api/model", Value::Null).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    let (s, _) = call(app.clone(), "POST", "/api/encode", wav_bytes(&AudioBuffer::silence(4096))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    let (s, body) = call(app, "GET", "/api/schema", vec![]).await;
    assert_eq!(s, StatusCode::OK);
    assert!(serde_json::from_slice::<Value>(&body).unwrap()["$defs"]["renderRequest"].is_object());
}

#[tokio::test]
async fn cors_and_static_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>knobs</h1>").unwrap();
    let app = router(None, &ServiceConfig { static_dir: Some(dir.path().into()), ..ServiceConfig::default() });
    let (status, body) = call(app.clone(), "GET", "/index.html", vec![]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<h1>knobs</h1>");

    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/render")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert!(res.headers().contains_key("access-control-allow-origin"));
}
