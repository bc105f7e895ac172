//! Readings, recordings and pending downlink commands.
//!
//! State lives in memory behind a single `RwLock`: writers are serialized and
//! every reader works against the state as it was when it took the lock, so a
//! batch insert is either entirely visible to a query or not at all. When a
//! data directory is configured, every mutation is first appended to
//! `store.log` (one JSON record per line after a versioned header line) and
//! recording payloads are written to `blobs/<sha256>`. Opening the directory
//! again replays the log.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    BoundingBox, DeviceId, DeviceKind, DeviceRecord, RecordingAsset, RecordingKind, TimeRange, TrapReading,
};

pub const LOG_FORMAT: &str = "trapnet-store";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("unknown recording {0}")]
    UnknownRecording(u64),
    #[error("device {device} is a {existing:?}, not a {requested:?}")]
    KindConflict { device: DeviceId, existing: DeviceKind, requested: DeviceKind },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("store log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::StorageFailure(e.to_string())
    }
}

/// Conjunction of optional predicates over readings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadingFilter {
    pub devices: Option<BTreeSet<DeviceId>>,
    pub time_range: Option<TimeRange>,
    pub bbox: Option<BoundingBox>,
    pub hours_of_day: Option<BTreeSet<u32>>,
}

impl ReadingFilter {
    pub fn validate(&self) -> Result<(), StoreError> {
        if let Some(r) = &self.time_range {
            if r.start >= r.end {
                return Err(StoreError::InvalidFilter("time range start must precede end".into()));
            }
        }
        if let Some(b) = &self.bbox {
            if !(b.lat_min <= b.lat_max && b.long_min <= b.long_max) {
                return Err(StoreError::InvalidFilter("bounding box minimum exceeds maximum".into()));
            }
        }
        if let Some(h) = &self.hours_of_day {
            if h.iter().any(|&h| h > 23) {
                return Err(StoreError::InvalidFilter("hours of day must be 0-23".into()));
            }
        }
        Ok(())
    }

    pub fn matches(&self, r: &TrapReading) -> bool {
        self.devices.as_ref().is_none_or(|d| d.contains(&r.device))
            && self.time_range.as_ref().is_none_or(|t| t.contains(r.timestamp))
            && self.bbox.as_ref().is_none_or(|b| b.contains(r.position()))
            && self.hours_of_day.as_ref().is_none_or(|h| h.contains(&r.timestamp.hour()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    PowerOn,
    PowerOff,
    SetSchedule,
    SetDetectionThreshold,
    SetTimezone,
}

impl std::str::FromStr for CommandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PowerOn" => Ok(CommandKind::PowerOn),
            "PowerOff" => Ok(CommandKind::PowerOff),
            "SetSchedule" => Ok(CommandKind::SetSchedule),
            "SetDetectionThreshold" => Ok(CommandKind::SetDetectionThreshold),
            "SetTimezone" => Ok(CommandKind::SetTimezone),
            other => Err(format!("unknown command {other:?}")),
        }
    }
}

/// Server-to-device configuration instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCommand {
    pub id: u64,
    pub device: DeviceId,
    pub command: CommandKind,
    pub payload: BTreeMap<String, serde_json::Value>,
    pub issued_at: NaiveDateTime,
    pub delivered: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogRecord {
    Header { format: String, version: u32 },
    Device { record: DeviceRecord },
    Readings { readings: Vec<TrapReading> },
    Recording { id: u64, asset: RecordingAsset },
    Command { command: DeviceCommand },
    Delivered { ids: Vec<u64> },
}

#[derive(Debug, Default, Clone)]
struct State {
    readings: BTreeMap<DeviceId, BTreeMap<NaiveDateTime, TrapReading>>,
    devices: BTreeMap<DeviceId, DeviceRecord>,
    recordings: BTreeMap<u64, RecordingAsset>,
    recording_keys: HashMap<(DeviceId, RecordingKind, String), u64>,
    commands: BTreeMap<u64, DeviceCommand>,
    pending: BTreeMap<DeviceId, VecDeque<u64>>,
    next_recording: u64,
    next_command: u64,
}

impl State {
    fn ensure_kind(&self, device: &DeviceId, kind: DeviceKind) -> Result<(), StoreError> {
        match self.devices.get(device) {
            Some(rec) if rec.kind != kind => {
                Err(StoreError::KindConflict { device: device.clone(), existing: rec.kind, requested: kind })
            }
            _ => Ok(()),
        }
    }

    fn apply(&mut self, record: LogRecord) {
        match record {
            LogRecord::Header { .. } => {}
            LogRecord::Device { record } => {
                let entry = self.devices.entry(record.device.clone()).or_insert_with(|| record.clone());
                entry.timezone_offset_minutes = record.timezone_offset_minutes.or(entry.timezone_offset_minutes);
                if record.last_position.is_some() {
                    entry.last_position = record.last_position;
                }
            }
            LogRecord::Readings { readings } => {
                let mut touched = BTreeSet::new();
                for r in readings {
                    touched.insert(r.device.clone());
                    self.readings.entry(r.device.clone()).or_default().insert(r.timestamp, r);
                }
                for device in touched {
                    let latest = self.readings[&device].values().next_back().map(TrapReading::position);
                    let rec = self.devices.entry(device.clone()).or_insert_with(|| DeviceRecord {
                        device: device.clone(),
                        kind: DeviceKind::EFunnel,
                        last_position: None,
                        timezone_offset_minutes: None,
                    });
                    rec.last_position = latest;
                }
            }
            LogRecord::Recording { id, asset } => {
                self.devices.entry(asset.device.clone()).or_insert_with(|| DeviceRecord {
                    device: asset.device.clone(),
                    kind: asset.name.kind.device_kind(),
                    last_position: None,
                    timezone_offset_minutes: None,
                });
                let key = (asset.device.clone(), asset.name.kind, asset.name.filename.clone());
                self.recording_keys.insert(key, id);
                self.recordings.insert(id, asset);
                self.next_recording = self.next_recording.max(id + 1);
            }
            LogRecord::Command { command } => {
                if !command.delivered {
                    self.pending.entry(command.device.clone()).or_default().push_back(command.id);
                }
                self.next_command = self.next_command.max(command.id + 1);
                self.commands.insert(command.id, command);
            }
            LogRecord::Delivered { ids } => {
                for id in ids {
                    if let Some(cmd) = self.commands.get_mut(&id) {
                        cmd.delivered = true;
                        if let Some(q) = self.pending.get_mut(&cmd.device) {
                            q.retain(|&p| p != id);
                        }
                    }
                }
            }
        }
    }
}

/// Read-only view of the store at one instant.
pub struct Snapshot<'a> {
    state: &'a State,
}

impl Snapshot<'_> {
    /// Readings matching every present clause, ordered by (device, timestamp).
    pub fn query_readings(&self, filter: &ReadingFilter) -> Vec<TrapReading> {
        let per_device: Box<dyn Iterator<Item = &BTreeMap<NaiveDateTime, TrapReading>>> = match &filter.devices {
            Some(set) => Box::new(set.iter().filter_map(|d| self.state.readings.get(d))),
            None => Box::new(self.state.readings.values()),
        };
        let mut out = Vec::new();
        for series in per_device {
            let rows: Box<dyn Iterator<Item = &TrapReading>> = match &filter.time_range {
                Some(t) => Box::new(series.range(t.start..t.end).map(|(_, r)| r)),
                None => Box::new(series.values()),
            };
            out.extend(rows.filter(|r| filter.matches(r)).cloned());
        }
        out
    }

    pub fn devices(&self) -> Vec<DeviceRecord> {
        self.state.devices.values().cloned().collect()
    }

    pub fn device(&self, id: &DeviceId) -> Option<&DeviceRecord> {
        self.state.devices.get(id)
    }

    pub fn reading_count(&self) -> usize {
        self.state.readings.values().map(BTreeMap::len).sum()
    }

    /// Newest first; `None` arguments match everything.
    pub fn list_recordings(
        &self,
        device: Option<&DeviceId>,
        kind: Option<RecordingKind>,
        time_range: Option<&TimeRange>,
    ) -> Vec<(u64, RecordingAsset)> {
        let mut out: Vec<(u64, RecordingAsset)> = self
            .state
            .recordings
            .iter()
            .filter(|(_, a)| device.is_none_or(|d| &a.device == d))
            .filter(|(_, a)| kind.is_none_or(|k| a.name.kind == k))
            .filter(|(_, a)| time_range.is_none_or(|t| t.contains(a.name.timestamp)))
            .map(|(id, a)| (*id, a.clone()))
            .collect();
        out.sort_by(|a, b| b.1.name.timestamp.cmp(&a.1.name.timestamp).then(b.0.cmp(&a.0)));
        out
    }

    pub fn recording(&self, id: u64) -> Option<&RecordingAsset> {
        self.state.recordings.get(&id)
    }
}

enum Blobs {
    Memory(Mutex<HashMap<String, Arc<Vec<u8>>>>),
    Disk(PathBuf),
}

pub struct Store {
    state: RwLock<State>,
    log: Option<Mutex<File>>,
    blobs: Blobs,
}

impl Store {
    /// A store with no durability; contents vanish with the value.
    pub fn in_memory() -> Self {
        Store { state: RwLock::new(State::default()), log: None, blobs: Blobs::Memory(Mutex::default()) }
    }

    /// Opens (or creates) a durable store rooted at `dir`, replaying its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("blobs"))?;
        let log_path = dir.join("store.log");
        let mut state = State::default();

        if log_path.exists() {
            let text = fs::read_to_string(&log_path)?;
            let lines: Vec<&str> = text.split_inclusive('\n').collect();
            let mut valid_len = 0usize;
            for (i, raw) in lines.iter().enumerate() {
                let line_no = i + 1;
                let line = raw.trim_end_matches(['\n', '\r']);
                if !line.trim().is_empty() {
                    let record: LogRecord = match serde_json::from_str(line) {
                        Ok(r) => r,
                        // A torn final line is an interrupted append; everything before it stands.
                        Err(_) if line_no == lines.len() && i > 0 => break,
                        Err(e) => return Err(StoreError::CorruptLog { line: line_no, message: e.to_string() }),
                    };
                    if i == 0 {
                        match &record {
                            LogRecord::Header { format, version }
                                if format == LOG_FORMAT && *version == LOG_VERSION => {}
                            _ => {
                                return Err(StoreError::CorruptLog {
                                    line: 1,
                                    message: format!("expected {LOG_FORMAT} v{LOG_VERSION} header"),
                                })
                            }
                        }
                    }
                    state.apply(record);
                }
                valid_len += raw.len();
            }
            if valid_len < text.len() || !text.is_empty() && !text.ends_with('\n') {
                let f = OpenOptions::new().write(true).open(&log_path)?;
                f.set_len(valid_len as u64)?;
            }
        }

        let fresh = !log_path.exists() || fs::metadata(&log_path)?.len() == 0;
        let mut file = OpenOptions::new().create(true).append(true).open(&log_path)?;
        if fresh {
            let header = LogRecord::Header { format: LOG_FORMAT.into(), version: LOG_VERSION };
            writeln!(file, "{}", serde_json::to_string(&header).expect("header serializes"))?;
            file.flush()?;
        }

        Ok(Store { state: RwLock::new(state), log: Some(Mutex::new(file)), blobs: Blobs::Disk(dir.join("blobs")) })
    }

    fn append(&self, record: &LogRecord) -> Result<(), StoreError> {
        if let Some(log) = &self.log {
            let line = serde_json::to_string(record).map_err(|e| StoreError::StorageFailure(e.to_string()))?;
            let mut f = log.lock().map_err(|_| StoreError::StorageFailure("log lock poisoned".into()))?;
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        Ok(())
    }

    fn write_state(&self) -> Result<std::sync::RwLockWriteGuard<'_, State>, StoreError> {
        self.state.write().map_err(|_| StoreError::StorageFailure("state lock poisoned".into()))
    }

    /// Runs `f` against a consistent view; writers wait until it returns.
    pub fn with_snapshot<R>(&self, f: impl FnOnce(&Snapshot<'_>) -> R) -> R {
        let guard = self.state.read().unwrap_or_else(|e| e.into_inner());
        f(&Snapshot { state: &guard })
    }

    pub fn query_readings(&self, filter: &ReadingFilter) -> Result<Vec<TrapReading>, StoreError> {
        filter.validate()?;
        Ok(self.with_snapshot(|s| s.query_readings(filter)))
    }

    /// Inserts a batch atomically. A repeated (device, timestamp) key replaces
    /// the earlier row.
    pub fn insert_readings(&self, readings: &[TrapReading]) -> Result<usize, StoreError> {
        if readings.is_empty() {
            return Ok(0);
        }
        let mut state = self.write_state()?;
        for r in readings {
            state.ensure_kind(&r.device, DeviceKind::EFunnel)?;
        }
        let record = LogRecord::Readings { readings: readings.to_vec() };
        self.append(&record)?;
        state.apply(record);
        Ok(readings.len())
    }

    pub fn register_device(&self, record: DeviceRecord) -> Result<(), StoreError> {
        let mut state = self.write_state()?;
        state.ensure_kind(&record.device, record.kind)?;
        let record = LogRecord::Device { record };
        self.append(&record)?;
        state.apply(record);
        Ok(())
    }

    /// Stores the payload under its SHA-256 and the asset under a recording id.
    /// Re-registering the same (device, kind, filename) keeps the id.
    pub fn register_recording(&self, mut asset: RecordingAsset, payload: &[u8]) -> Result<u64, StoreError> {
        let key = hex::encode(Sha256::digest(payload));
        self.put_blob(&key, payload)?;
        asset.payload_ref = Some(key);

        let mut state = self.write_state()?;
        state.ensure_kind(&asset.device, asset.name.kind.device_kind())?;
        let lookup = (asset.device.clone(), asset.name.kind, asset.name.filename.clone());
        let id = state.recording_keys.get(&lookup).copied().unwrap_or(state.next_recording);
        let record = LogRecord::Recording { id, asset };
        self.append(&record)?;
        state.apply(record);
        Ok(id)
    }

    fn put_blob(&self, key: &str, payload: &[u8]) -> Result<(), StoreError> {
        match &self.blobs {
            Blobs::Memory(m) => {
                let mut m = m.lock().map_err(|_| StoreError::StorageFailure("blob lock poisoned".into()))?;
                m.entry(key.to_string()).or_insert_with(|| Arc::new(payload.to_vec()));
            }
            Blobs::Disk(dir) => {
                let path = dir.join(key);
                if !path.exists() {
                    let tmp = dir.join(format!("{key}.tmp"));
                    fs::write(&tmp, payload)?;
                    fs::rename(&tmp, &path)?;
                }
            }
        }
        Ok(())
    }

    pub fn payload(&self, key: &str) -> Result<Arc<Vec<u8>>, StoreError> {
        if key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(StoreError::StorageFailure(format!("invalid payload key {key:?}")));
        }
        match &self.blobs {
            Blobs::Memory(m) => {
                let m = m.lock().map_err(|_| StoreError::StorageFailure("blob lock poisoned".into()))?;
                m.get(key).cloned().ok_or_else(|| StoreError::StorageFailure(format!("missing payload {key}")))
            }
            Blobs::Disk(dir) => Ok(Arc::new(fs::read(dir.join(key))?)),
        }
    }

    pub fn recording_payload(&self, id: u64) -> Result<(RecordingAsset, Arc<Vec<u8>>), StoreError> {
        let asset = self.with_snapshot(|s| s.recording(id).cloned()).ok_or(StoreError::UnknownRecording(id))?;
        let key = asset.payload_ref.clone().ok_or(StoreError::UnknownRecording(id))?;
        let bytes = self.payload(&key)?;
        Ok((asset, bytes))
    }

    pub fn list_recordings(
        &self,
        device: Option<&DeviceId>,
        kind: Option<RecordingKind>,
        time_range: Option<&TimeRange>,
    ) -> Vec<(u64, RecordingAsset)> {
        self.with_snapshot(|s| s.list_recordings(device, kind, time_range))
    }

    pub fn devices(&self) -> Vec<DeviceRecord> {
        self.with_snapshot(|s| s.devices())
    }

    pub fn enqueue_command(
        &self,
        device: &DeviceId,
        command: CommandKind,
        payload: BTreeMap<String, serde_json::Value>,
        issued_at: NaiveDateTime,
    ) -> Result<u64, StoreError> {
        let mut state = self.write_state()?;
        if !state.devices.contains_key(device) {
            return Err(StoreError::UnknownDevice(device.clone()));
        }
        let id = state.next_command;
        let record = LogRecord::Command {
            command: DeviceCommand { id, device: device.clone(), command, payload, issued_at, delivered: false },
        };
        self.append(&record)?;
        state.apply(record);
        Ok(id)
    }

    /// Returns undelivered commands in issue order and marks them delivered;
    /// each command is handed out by exactly one poll.
    pub fn poll_commands(&self, device: &DeviceId) -> Result<Vec<DeviceCommand>, StoreError> {
        let mut state = self.write_state()?;
        if !state.devices.contains_key(device) {
            return Err(StoreError::UnknownDevice(device.clone()));
        }
        let ids: Vec<u64> = state.pending.get(device).map(|q| q.iter().copied().collect()).unwrap_or_default();
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let record = LogRecord::Delivered { ids: ids.clone() };
        self.append(&record)?;
        let out = ids.iter().map(|id| state.commands[id].clone()).collect();
        state.apply(record);
        Ok(out)
    }
}
