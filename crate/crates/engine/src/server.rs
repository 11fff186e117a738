//! HTTP service over an immutable model snapshot.

use crate::audio::{encode_wav, ingest_bytes};
use crate::error::{Error, Result};
use crate::synth::{synthesize, Source, SynthesisRequest, ZMode, Z_LIMIT};
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use ddsp_sfx_core::features::{analyze, ControlFrames};
use ddsp_sfx_core::model::{Model, ModelConfig};
use ddsp_sfx_core::FrameConfig;
use serde::{Deserialize, Serialize};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use tower_http::services::ServeDir;

const BODY_LIMIT: usize = 64 << 20;

#[derive(Clone)]
pub struct AppState {
    model: Arc<Model>,
    step: u64,
}

impl AppState {
    pub fn new(model: Model, step: u64) -> Self {
        Self {
            model: Arc::new(model),
            step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub frame: FrameConfig,
    pub model: ModelConfig,
    pub step: u64,
    pub z_limit: f64,
}

/// Controls of an uploaded clip, with `z` set to the encoder mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub frames: usize,
    pub sample_rate: u32,
    pub confidence: Vec<f64>,
    #[serde(flatten)]
    pub controls: ControlFrames,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeBody {
    #[serde(default)]
    pub features: Option<ControlFrames>,
    #[serde(default)]
    pub wav_base64: Option<String>,
    /// `encoded`, `constant` or `curve`.
    pub z_mode: String,
    #[serde(default)]
    pub z_value: Option<f64>,
    #[serde(default)]
    pub z_curve: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sample_latent: bool,
}

impl SynthesizeBody {
    pub fn into_request(self, frame: &FrameConfig) -> Result<SynthesisRequest> {
        let source = match (self.features, self.wav_base64) {
            (Some(f), None) => Source::Features(f),
            (None, Some(b64)) => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(b64.trim())
                    .map_err(|e| Error::Request(format!("wav_base64: {e}")))?;
                Source::Audio(ingest_bytes(&bytes, frame)?)
            }
            _ => return Err(Error::Request("give exactly one of features or wav_base64".into())),
        };
        let z = match self.z_mode.as_str() {
            "encoded" => ZMode::Encoded,
            "constant" => ZMode::Constant(
                self.z_value
                    .ok_or_else(|| Error::Request("constant mode needs z_value".into()))?,
            ),
            "curve" => ZMode::Curve(
                self.z_curve
                    .ok_or_else(|| Error::Request("curve mode needs z_curve".into()))?,
            ),
            other => return Err(Error::Request(format!("unknown z_mode {other:?}"))),
        };
        Ok(SynthesisRequest {
            source,
            z,
            seed: self.seed,
            sample_latent: self.sample_latent,
        })
    }
}

struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = if self.0.is_client_error() {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        let body = serde_json::json!({ "error": self.0.to_string() });
        (status, Json(body)).into_response()
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let app = Router::new()
        .route("/health", get(health))
        .route("/model", get(model_info))
        .route("/analyze", post(analyze_clip))
        .route("/synthesize", post(synthesize_clip))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn model_info(State(state): State<AppState>) -> Json<ModelInfo> {
    Json(ModelInfo {
        frame: *state.model.frame(),
        model: state.model.config().clone(),
        step: state.step,
        z_limit: Z_LIMIT,
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Error::Io(std::io::Error::other(e)))?
}

async fn analyze_clip(State(state): State<AppState>, body: Bytes) -> std::result::Result<Json<AnalyzeResponse>, ApiError> {
    let model = state.model.clone();
    let response = blocking(move || {
        let frame = *model.frame();
        let clip = ingest_bytes(&body, &frame)?;
        let a = analyze(&clip, &frame)?;
        let mut controls = a.controls;
        controls.z = Some(model.encode(&a.mel, &vec![0.0; frame.frame_count])?.z);
        Ok(AnalyzeResponse {
            frames: frame.frame_count,
            sample_rate: frame.sample_rate,
            confidence: a.pitch.confidence,
            controls,
        })
    })
    .await?;
    Ok(Json(response))
}

async fn synthesize_clip(
    State(state): State<AppState>,
    Json(body): Json<SynthesizeBody>,
) -> std::result::Result<Response, ApiError> {
    let model = state.model.clone();
    let wav = blocking(move || {
        let req = body.into_request(model.frame())?;
        encode_wav(&synthesize(&model, &req)?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], wav).into_response())
}

/// Binds first so a busy port fails before any request is accepted.
pub async fn serve(state: AppState, port: u16, static_dir: Option<PathBuf>) -> Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Config(format!("cannot listen on port {port}: {e}")))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir)).await?;
    Ok(())
}
