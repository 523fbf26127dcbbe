//! HTTP front end.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /api/render` | `{ architecture, duration_s?, include_analysis? }` | base64 WAV per leaf, optional spectrogram and encoding matrices, `render_ms` |
//! | `GET /api/model` | | layer sizes, weight-file SHA-256, loss summary |
//! | `POST /api/encode` | WAV bytes | encoding series |
//! | `GET /api/schema` | | JSON schema of the bodies above |
//!
//! Errors are JSON objects `{ error, message, node?, field?, nodes? }`.
//! Status codes: 400 invalid input, 413 duration above the limit, 429 when
//! every render slot is busy, 503 when no model is loaded.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::analysis::{encoding_timeseries, spectrogram, EncodingSeries, Spectrogram};
use crate::autoencoder::{loss_csv_path, read_weights, AutoencoderModel, LossHistory};
use crate::dsp::StftConfig;
use crate::netmod::{render_architecture, ArchitectureSpec, RenderConfig};
use crate::wav::{parse_wav, wav_bytes};
use crate::{Error, Result};

pub const DEFAULT_MAX_DURATION_S: f64 = 30.0;
pub const DEFAULT_MAX_CONCURRENT_RENDERS: usize = 4;

/// The published request/response schema.
pub const API_SCHEMA: &str = include_str!("../schema/api.schema.json");

const REQUEST_FIELDS: &[&str] = &["architecture", "duration_s", "include_analysis"];

/// Training-loss digest reported by `GET /api/model`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossSummary {
    pub epochs: usize,
    pub first_val_mse: f64,
    pub final_train_mse: f64,
    pub final_val_mse: f64,
    pub mean_val_first5: f64,
    pub mean_val_last5: f64,
}

impl LossSummary {
    pub fn from_history(history: &LossHistory) -> Option<Self> {
        let first = history.epochs.first()?;
        let last = history.epochs.last()?;
        Some(Self {
            epochs: history.epochs.len(),
            first_val_mse: first.val_mse,
            final_train_mse: last.train_mse,
            final_val_mse: last.val_mse,
            mean_val_first5: history.mean_val_first(5),
            mean_val_last5: history.mean_val_last(5),
        })
    }
}

/// A model plus what `GET /api/model` reports about it.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: AutoencoderModel,
    pub sha256: String,
    pub loss: Option<LossSummary>,
}

impl LoadedModel {
    /// Reads a weight file and, if present, the loss CSV beside it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let model = read_weights(&bytes)?;
        let loss = match std::fs::read_to_string(loss_csv_path(path)) {
            Ok(text) => match LossHistory::from_csv(&text) {
                Ok(h) => LossSummary::from_history(&h),
                Err(e) => {
                    tracing::warn!("ignoring unreadable loss history: {e}");
                    None
                }
            },
            Err(_) => None,
        };
        Ok(Self {
            model,
            sha256: hex_digest(&bytes),
            loss,
        })
    }

    pub fn from_model(model: AutoencoderModel) -> Self {
        let mut bytes = Vec::new();
        crate::autoencoder::write_weights(&model, &mut bytes).expect("writing to a Vec");
        Self {
            model,
            sha256: hex_digest(&bytes),
            loss: None,
        }
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_duration_s: f64,
    pub max_concurrent_renders: usize,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_duration_s: DEFAULT_MAX_DURATION_S,
            max_concurrent_renders: DEFAULT_MAX_CONCURRENT_RENDERS,
            static_dir: None,
        }
    }
}

#[derive(Clone)]
struct AppState {
    model: Option<Arc<LoadedModel>>,
    max_duration_s: f64,
    renders: Arc<Semaphore>,
}

/// Builds the application. `model` may be absent, in which case model-backed
/// routes answer 503.
pub fn router(model: Option<LoadedModel>, cfg: &ServiceConfig) -> Router {
    let state = AppState {
        model: model.map(Arc::new),
        max_duration_s: cfg.max_duration_s,
        renders: Arc::new(Semaphore::new(cfg.max_concurrent_renders)),
    };
    let api = Router::new()
        .route("/api/render", post(render_handler))
        .route("/api/model", get(model_handler))
        .route("/api/encode", post(encode_handler))
        .route("/api/schema", get(schema_handler))
        .with_state(state)
        .layer(CorsLayer::permissive());
    match &cfg.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until Ctrl-C.
pub async fn serve(model: Option<LoadedModel>, cfg: ServiceConfig, port: u16) -> Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("tcp {addr}"), e))?;
    tracing::info!("listening on http://{addr}");
    axum::serve(listener, router(model, &cfg))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(format!("tcp {addr}"), e))
}

struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": kind, "message": message.into() }),
        }
    }

    fn bad_request(field: &str, message: impl Into<String>) -> Self {
        let mut e = Self::new(StatusCode::BAD_REQUEST, "invalid_request", message);
        e.body["field"] = json!(field);
        e
    }

    fn no_model() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no_model", "no model is loaded")
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Spec { node, field, .. } => {
                let mut a = Self::new(StatusCode::BAD_REQUEST, "invalid_spec", message);
                a.body["node"] = json!(node);
                a.body["field"] = json!(field);
                a
            }
            Error::Architecture { nodes, .. } => {
                let mut a = Self::new(StatusCode::BAD_REQUEST, "invalid_architecture", message);
                a.body["nodes"] = json!(nodes);
                a
            }
            Error::Wav(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_wav", message),
            Error::Argument(_) | Error::Shape { .. } => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_argument", message)
            }
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Serialize)]
struct LeafPayload {
    id: String,
    samples: usize,
    duration_s: f64,
    wav_base64: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrogram: Option<Spectrogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    encoding: Option<EncodingSeries>,
}

#[derive(Debug, Serialize)]
struct RenderResponse {
    duration_s: f64,
    leaves: Vec<LeafPayload>,
    render_ms: f64,
}

/// Parsed and validated `POST /api/render` body.
struct RenderRequest {
    spec: ArchitectureSpec,
    include_analysis: bool,
}

fn parse_render_request(body: &[u8]) -> Result<RenderRequest, ApiError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request("-", format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ApiError::bad_request("-", "request must be a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| !REQUEST_FIELDS.contains(&k.as_str())) {
        return Err(ApiError::bad_request(k, "unknown field"));
    }
    let include_analysis = match obj.get("include_analysis") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(ApiError::bad_request("include_analysis", "must be a boolean")),
    };
    let mut arch: Map<String, Value> = match obj.get("architecture") {
        Some(Value::Object(a)) => a.clone(),
        Some(_) => return Err(ApiError::bad_request("architecture", "must be an object")),
        None => return Err(ApiError::bad_request("architecture", "missing")),
    };
    match obj.get("duration_s") {
        None | Some(Value::Null) => {}
        Some(d @ Value::Number(_)) => {
            arch.insert("duration_s".into(), d.clone());
        }
        Some(_) => return Err(ApiError::bad_request("duration_s", "must be a number")),
    }
    if !arch.contains_key("duration_s") {
        return Err(ApiError::bad_request("duration_s", "missing"));
    }
    let spec = ArchitectureSpec::from_value(&Value::Object(arch))?;
    Ok(RenderRequest {
        spec,
        include_analysis,
    })
}

async fn render_handler(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let model = state.model.clone().ok_or_else(ApiError::no_model)?;
    let req = parse_render_request(&body)?;
    let arch = req.spec.to_architecture()?;
    let duration_s = req.spec.duration_s;
    if duration_s > state.max_duration_s {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "duration_too_long",
            format!(
                "duration_s {duration_s} exceeds the limit of {} s",
                state.max_duration_s
            ),
        ));
    }
    let permit = state.renders.clone().try_acquire_owned().map_err(|_| {
        ApiError::new(
            StatusCode::TOO_MANY_REQUESTS,
            "busy",
            "all render slots are in use; retry shortly",
        )
    })?;
    let include_analysis = req.include_analysis;
    let response = tokio::task::spawn_blocking(move || -> Result<RenderResponse> {
        let _permit = permit;
        let start = Instant::now();
        let result = render_architecture(&model.model, &arch, duration_s, &RenderConfig::default())?;
        let stft = StftConfig::default();
        let leaves = result
            .leaves
            .iter()
            .map(|(id, audio)| {
                let (spectrogram, encoding) = if include_analysis {
                    (
                        Some(spectrogram(audio, &stft)?),
                        Some(encoding_timeseries(&model.model, audio)?),
                    )
                } else {
                    (None, None)
                };
                Ok(LeafPayload {
                    id: id.clone(),
                    samples: audio.len(),
                    duration_s: audio.duration_s(),
                    wav_base64: base64::engine::general_purpose::STANDARD.encode(wav_bytes(audio)),
                    spectrogram,
                    encoding,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RenderResponse {
            duration_s,
            leaves,
            render_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(response).into_response())
}

async fn model_handler(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    let loaded = state.model.as_ref().ok_or_else(ApiError::no_model)?;
    let spec = loaded.model.layer_spec();
    Ok(Json(json!({
        "input_bins": crate::autoencoder::FRAME_BINS,
        "latent_dim": crate::autoencoder::LATENT_DIM,
        "layer_sizes": spec.sizes(),
        "parameter_count": loaded.model.parameter_count(),
        "weights_sha256": loaded.sha256,
        "loss": loaded.loss,
    })))
}

async fn encode_handler(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let model = state.model.clone().ok_or_else(ApiError::no_model)?;
    let audio = parse_wav(&body)?;
    if audio.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_wav", "WAV holds no samples"));
    }
    let series = tokio::task::spawn_blocking(move || encoding_timeseries(&model.model, &audio))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(series).into_response())
}

async fn schema_handler() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/schema+json")], API_SCHEMA)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_parsing() {
        let ok = br#"{"architecture":{"nodes":[{"id":"m","mode":"modulator","latent":[1,1,1,1,1,1,1,1]}]},"duration_s":2}"#;
        let req = parse_render_request(ok).ok().unwrap();
        assert_eq!(req.spec.duration_s, 2.0);
        assert!(!req.include_analysis);

        let field = |body: &[u8]| match parse_render_request(body) {
            Err(e) => e.body["field"].as_str().unwrap().to_string(),
            Ok(_) => panic!("expected an error"),
        };
        assert_eq!(field(br#"{"architecture":{"nodes":[]},"duration_s":1,"x":1}"#), "x");
        assert_eq!(field(br#"{"architecture":{"nodes":[]}}"#), "duration_s");
        assert_eq!(field(br#"{"duration_s":1}"#), "architecture");
        assert_eq!(
            field(br#"{"architecture":{"nodes":[]},"duration_s":1,"include_analysis":"yes"}"#),
            "include_analysis"
        );
    }

    #[test]
    fn schema_lists_every_node_field() {
        let schema: Value = serde_json::from_str(API_SCHEMA).unwrap();
        let props = schema["$defs"]["node"]["properties"].as_object().unwrap();
        for f in [
            "id",
            "mode",
            "parent",
            "latent",
            "bias",
            "feedback",
            "pitch_shift_semitones",
            "envelope",
        ] {
            assert!(props.contains_key(f), "{f}");
        }
        let req = schema["$defs"]["renderRequest"]["properties"].as_object().unwrap();
        assert_eq!(req.len(), REQUEST_FIELDS.len());
    }
}
