//! HTTP API, tool manifest and offline CLI plumbing over `trapnet-core`.

pub mod api;
pub mod decoder;
pub mod error;
pub mod params;
pub mod tools;

use std::path::{Path, PathBuf};

use serde::Serialize;
use trapnet_core::ingest::{parse_recording_filename, parse_tabular, IngestReport};
use trapnet_core::model::{DeviceId, RecordingAsset, RecordingKind};
use trapnet_core::store::Store;

pub use api::{router, AppState};
pub use error::ApiError;
pub use params::Params;

#[derive(Debug, Default, Serialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Default, Serialize)]
pub struct IngestSummary {
    pub tables: Vec<(PathBuf, IngestReport)>,
    pub recordings: Vec<(PathBuf, u64)>,
    pub skipped: Vec<SkippedFile>,
}

/// Ingests a CSV file, or walks a directory: `.csv` files are readings, any
/// other file whose name matches a recording grammar is stored under the
/// device named by its parent directory.
pub fn ingest_path(store: &Store, path: &Path) -> anyhow::Result<IngestSummary> {
    let mut summary = IngestSummary::default();
    if path.is_file() {
        ingest_file(store, path, None, &mut summary)?;
        return Ok(summary);
    }
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(path)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    for f in files {
        let device =
            f.parent().filter(|p| p != &path).and_then(|p| p.file_name()).map(|n| n.to_string_lossy().to_string());
        ingest_file(store, &f, device, &mut summary)?;
    }
    Ok(summary)
}

fn ingest_file(store: &Store, f: &Path, device: Option<String>, summary: &mut IngestSummary) -> anyhow::Result<()> {
    let name = f.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
    if name.to_ascii_lowercase().ends_with(".csv") {
        let (rows, report) = parse_tabular(&std::fs::read_to_string(f)?)?;
        store.insert_readings(&rows)?;
        summary.tables.push((f.to_path_buf(), report));
        return Ok(());
    }
    let parsed = [RecordingKind::Vibration, RecordingKind::Wingbeat, RecordingKind::Image]
        .into_iter()
        .find_map(|k| parse_recording_filename(&name, k).ok());
    match (parsed, device) {
        (Some(rec), Some(device)) => {
            let asset = RecordingAsset { device: DeviceId::new(device), name: rec, payload_ref: None };
            let id = store.register_recording(asset, &std::fs::read(f)?)?;
            summary.recordings.push((f.to_path_buf(), id));
        }
        (Some(_), None) => summary
            .skipped
            .push(SkippedFile { path: f.to_path_buf(), reason: "recording has no device directory".into() }),
        (None, _) => summary
            .skipped
            .push(SkippedFile { path: f.to_path_buf(), reason: "not a CSV table or a recording filename".into() }),
    }
    Ok(())
}

/// Writes `readings.csv`, `truth.json` and `recordings/<device>/<file>` for a
/// synthetic fleet. Returns the number of readings written.
pub fn generate_dataset(config: &trapnet_core::synth::FleetConfig, seed: u64, out: &Path) -> anyhow::Result<usize> {
    use trapnet_core::synth::{generate_fleet, generate_recordings};
    let (rows, truth) = generate_fleet(config, seed)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("readings.csv"), trapnet_core::ingest::render_tabular(&rows))?;
    std::fs::write(out.join("truth.json"), trapnet_core::canonical_json(&truth)? + "\n")?;
    let start = config.start.and_hms_opt(0, 0, 0).expect("midnight");
    for rec in generate_recordings(start, seed)? {
        let dir = out.join("recordings").join(rec.device.as_str());
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(&rec.filename), &rec.wav)?;
    }
    Ok(rows.len())
}
