use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, Request, State};
use axum::http::header;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use trapnet_core::dsp::AudioDecoder;
use trapnet_core::ingest::{parse_recording_filename, parse_tabular};
use trapnet_core::model::{DeviceId, MediaFormat, RecordingAsset, RecordingKind};
use trapnet_core::store::{CommandKind, ReadingFilter, Store};

use crate::error::ApiError;
use crate::params::Params;
use crate::tools;

const BODY_LIMIT: usize = 512 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub token: Option<String>,
    pub decoder: Option<Arc<dyn AudioDecoder>>,
}

impl AppState {
    pub fn new(store: Arc<Store>) -> Self {
        AppState { store, token: None, decoder: None }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/ingest/readings", post(ingest_readings))
        .route("/api/ingest/recordings/{kind}", post(ingest_recording))
        .route("/api/devices", get(list_devices))
        .route("/api/devices/{id}/readings", get(device_readings))
        .route("/api/devices/{id}/commands", post(enqueue_command))
        .route("/api/devices/{id}/commands/poll", get(poll_commands))
        .route("/api/recordings", get(list_recordings))
        .route("/api/recordings/{id}/payload", get(recording_payload))
        .route("/api/analytics/{name}", get(run_analytics))
        .route("/api/dsp/{id}/analysis", get(run_dsp))
        .route("/api/tools/manifest", get(|| async { json(&tools::manifest()) }))
        .route("/api/tools/manifest/schema", get(|| async { json(&tools::meta_schema()) }))
        .fallback(|| async { ApiError::not_found("path", "no such endpoint") })
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

async fn authorize(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let presented = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if presented != Some(format!("Bearer {token}").as_str()) {
            return ApiError::new(401, "unauthorized", None, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

/// Canonical JSON response.
pub fn json<T: Serialize>(value: &T) -> Response {
    match trapnet_core::canonical_json(value) {
        Ok(body) => ([(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Err(e) => ApiError::new(500, "serialization_failure", None, e.to_string()).into_response(),
    }
}

type QueryMap = Result<Query<BTreeMap<String, String>>, axum::extract::rejection::QueryRejection>;

fn query(q: QueryMap) -> Result<Params, ApiError> {
    q.map(|Query(m)| Params::new(m)).map_err(|e| ApiError::new(400, "invalid_query", None, e.body_text()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::new(500, "internal_error", None, e.to_string()))?
}

async fn ingest_readings(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = String::from_utf8(body.to_vec())
        .map_err(|_| ApiError::new(400, "invalid_encoding", None, "CSV body must be UTF-8"))?;
    let report = blocking(move || {
        let (rows, report) = parse_tabular(&text)?;
        st.store.insert_readings(&rows)?;
        Ok(report)
    })
    .await?;
    Ok(json(&report))
}

async fn ingest_recording(
    State(st): State<AppState>,
    Path(kind): Path<String>,
    mut form: Multipart,
) -> Result<Response, ApiError> {
    let kind: RecordingKind = kind.parse().map_err(|e: String| ApiError::bad_param("kind", e))?;
    let (mut device, mut filename, mut payload) = (None, None, None);
    let bad_form =
        |e: axum::extract::multipart::MultipartError| ApiError::new(400, "invalid_multipart", None, e.body_text());
    while let Some(field) = form.next_field().await.map_err(bad_form)? {
        match field.name().unwrap_or_default() {
            "device" => device = Some(field.text().await.map_err(bad_form)?),
            "filename" => filename = Some(field.text().await.map_err(bad_form)?),
            "file" => {
                if filename.is_none() {
                    filename = field.file_name().map(str::to_string);
                }
                payload = Some(field.bytes().await.map_err(bad_form)?);
            }
            other => {
                return Err(ApiError::new(
                    400,
                    "unknown_parameter",
                    Some(other),
                    format!("unexpected form field {other:?}"),
                ))
            }
        }
    }
    let device = device.filter(|d| !d.trim().is_empty()).ok_or_else(|| ApiError::missing("device"))?;
    let filename = filename.ok_or_else(|| ApiError::missing("filename"))?;
    let payload = payload.ok_or_else(|| ApiError::missing("file"))?;
    let name = parse_recording_filename(&filename, kind)?;
    let asset = RecordingAsset { device: DeviceId::new(device.trim()), name, payload_ref: None };
    let (id, asset) = blocking(move || {
        let id = st.store.register_recording(asset, &payload)?;
        let stored = st.store.with_snapshot(|s| s.recording(id).cloned());
        Ok((id, stored.expect("just registered")))
    })
    .await?;
    Ok(json(&Listed { id, asset }))
}

async fn list_devices(State(st): State<AppState>) -> Response {
    json(&st.store.devices())
}

async fn device_readings(
    State(st): State<AppState>,
    Path(id): Path<String>,
    q: QueryMap,
) -> Result<Response, ApiError> {
    let p = query(q)?;
    p.only(&["start", "end", "hours"])?;
    let device = DeviceId::new(id);
    let filter = ReadingFilter {
        devices: Some([device.clone()].into()),
        time_range: p.time_range("start", "end")?,
        hours_of_day: p.hours("hours")?,
        bbox: None,
    };
    let rows = blocking(move || {
        if st.store.with_snapshot(|s| s.device(&device).is_none()) {
            return Err(ApiError::new(404, "unknown_device", Some("id"), format!("unknown device {device}")));
        }
        Ok(st.store.query_readings(&filter)?)
    })
    .await?;
    Ok(json(&rows))
}

#[derive(Serialize)]
struct Listed {
    id: u64,
    asset: RecordingAsset,
}

async fn list_recordings(State(st): State<AppState>, q: QueryMap) -> Result<Response, ApiError> {
    let p = query(q)?;
    p.only(&["device", "kind", "start", "end"])?;
    let device = p.device("device")?;
    let kind =
        p.raw("kind").map(|k| k.parse::<RecordingKind>().map_err(|e| ApiError::bad_param("kind", e))).transpose()?;
    let range = p.time_range("start", "end")?;
    let list: Vec<Listed> = st
        .store
        .list_recordings(device.as_ref(), kind, range.as_ref())
        .into_iter()
        .map(|(id, asset)| Listed { id, asset })
        .collect();
    Ok(json(&list))
}

fn content_type(format: MediaFormat) -> &'static str {
    match format {
        MediaFormat::Wav => "audio/wav",
        MediaFormat::Mp3 => "audio/mpeg",
        MediaFormat::Jpeg => "image/jpeg",
    }
}

async fn recording_payload(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id: u64 = id.parse().map_err(|_| ApiError::bad_param("id", "recording id must be a non-negative integer"))?;
    let (asset, bytes) = blocking(move || Ok(st.store.recording_payload(id)?)).await?;
    let disposition = format!("attachment; filename=\"{}\"", asset.name.filename);
    Ok((
        [
            (header::CONTENT_TYPE, content_type(asset.name.format).to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes.as_ref().clone(),
    )
        .into_response())
}

async fn run_analytics(
    State(st): State<AppState>,
    Path(name): Path<String>,
    q: QueryMap,
) -> Result<Response, ApiError> {
    let p = query(q)?;
    let tool = tools::find(&name)
        .filter(|t| t.is_analytics())
        .ok_or_else(|| ApiError::not_found("name", format!("unknown analytics operation {name:?}")))?;
    let value = blocking(move || tools::execute(&st.store, None, tool.name, &p)).await?;
    Ok(json(&value))
}

async fn run_dsp(State(st): State<AppState>, Path(id): Path<String>, q: QueryMap) -> Result<Response, ApiError> {
    let mut p = query(q)?;
    if p.0.contains_key("id") {
        return Err(ApiError::new(400, "unknown_parameter", Some("id"), "the recording id belongs in the path"));
    }
    p.0.insert("id".into(), id);
    let value = blocking(move || tools::execute(&st.store, st.decoder.as_deref(), "dsp-analysis", &p)).await?;
    Ok(json(&value))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandBody {
    command: String,
    #[serde(default)]
    payload: BTreeMap<String, serde_json::Value>,
    issued_at: Option<String>,
}

#[derive(Serialize)]
struct Enqueued {
    id: u64,
}

async fn enqueue_command(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: CommandBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(400, "invalid_body", None, e.to_string()))?;
    let command: CommandKind = body.command.parse().map_err(|e: String| ApiError::bad_param("command", e))?;
    let given = Params::new(body.issued_at.into_iter().map(|t| ("issued_at".to_string(), t)).collect());
    let issued_at = given.time("issued_at")?.unwrap_or_else(|| chrono::Utc::now().naive_utc());
    let device = DeviceId::new(id);
    let cmd_id = blocking(move || Ok(st.store.enqueue_command(&device, command, body.payload, issued_at)?)).await?;
    Ok(json(&Enqueued { id: cmd_id }))
}

async fn poll_commands(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let device = DeviceId::new(id);
    let cmds = blocking(move || Ok(st.store.poll_commands(&device)?)).await?;
    Ok(json(&cmds))
}
