//! Parsers for the e-funnel CSV format and the recording filename grammars.
//!
//! Tabular rows follow the seven-column layout (`Timestamp, Counts,
//! Temperature, Humidity, Lat, Long, Name`, any order). Recording files are
//! named `F_YYYYMMDDHHMMSS_<serial>.<ext>`; wingbeat files additionally carry
//! `_Temp<t>_Hum<h>_Opt<o>` before the extension.

use std::collections::{BTreeSet, HashMap};

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_with, DeviceId, Field, MediaFormat, RecordingKind, RecordingName, TrapReading, ValidationError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("CSV header is missing columns: {}", .0.join(", "))]
    MissingHeader(Vec<String>),
    #[error("CSV header could not be read: {0}")]
    UnreadableHeader(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilenameError {
    #[error("{name:?} does not match the {kind:?} filename grammar")]
    GrammarMismatch { kind: RecordingKind, name: String },
    #[error("{name:?} encodes an impossible date or time")]
    InvalidDate { name: String },
    #[error("recording fields cannot be rendered: {0}")]
    InconsistentFields(String),
}

/// A data row that failed validation. `row` is 1-based and excludes the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub row: usize,
    pub code: String,
    pub field: Option<Field>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<RejectedRow>,
    pub device_set: BTreeSet<DeviceId>,
}

impl IngestReport {
    pub fn total_rows(&self) -> usize {
        self.accepted + self.rejected.len()
    }
}

/// Parses `DD-MM-YY H:MM` (two-digit years map to 2000-2099) or ISO-8601
/// `YYYY-MM-DDTHH:MM[:SS]`. Seconds, when present, must be zero.
pub fn parse_timestamp(text: &str) -> Result<NaiveDateTime, ValidationError> {
    let malformed = || ValidationError::MalformedTimestamp(text.to_string());
    let text_trim = text.trim();
    if text_trim.is_empty() {
        return Err(malformed());
    }

    let parsed = if text_trim.contains('T') {
        NaiveDateTime::parse_from_str(text_trim, "%Y-%m-%dT%H:%M:%S")
            .or_else(|_| NaiveDateTime::parse_from_str(text_trim, "%Y-%m-%dT%H:%M"))
            .ok()
    } else {
        parse_short_form(text_trim)
    };
    let ts = parsed.ok_or_else(malformed)?;
    if ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(malformed());
    }
    Ok(ts)
}

fn parse_short_form(text: &str) -> Option<NaiveDateTime> {
    let (date, time) = text.split_once(' ')?;
    let mut parts = date.split('-');
    let day = small_number(parts.next()?, 1, 2)?;
    let month = small_number(parts.next()?, 1, 2)?;
    let year = small_number(parts.next()?, 2, 2)?;
    if parts.next().is_some() {
        return None;
    }
    let (hour, minute) = time.trim().split_once(':')?;
    let hour = small_number(hour, 1, 2)?;
    let minute = small_number(minute, 2, 2)?;
    let date = NaiveDate::from_ymd_opt(2000 + year as i32, month, day)?;
    let time = NaiveTime::from_hms_opt(hour, minute, 0)?;
    Some(date.and_time(time))
}

fn small_number(s: &str, min_len: usize, max_len: usize) -> Option<u32> {
    if s.len() < min_len || s.len() > max_len || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Inverse of [`parse_timestamp`]; uses the short tabular form when the year allows it.
pub fn render_timestamp(ts: NaiveDateTime) -> String {
    if (2000..=2099).contains(&ts.year()) {
        ts.format("%d-%m-%y %-H:%M").to_string()
    } else {
        ts.format("%Y-%m-%dT%H:%M").to_string()
    }
}

/// Parses a CSV document with a header row. Bad rows are reported, never dropped.
pub fn parse_tabular(csv_text: &str) -> Result<(Vec<TrapReading>, IngestReport), IngestError> {
    let first_line = csv_text.lines().next().unwrap_or("");
    let delimiter = if !first_line.contains(',') && first_line.contains('\t') { b'\t' } else { b',' };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());

    let headers = reader.headers().map_err(|e| IngestError::UnreadableHeader(e.to_string()))?.clone();
    let mut index: HashMap<Field, usize> = HashMap::new();
    for f in Field::ALL {
        if let Some(i) = headers.iter().position(|h| h.trim_start_matches('\u{feff}') == f.column()) {
            index.insert(f, i);
        }
    }
    let missing: Vec<String> =
        Field::ALL.iter().filter(|f| !index.contains_key(f)).map(|f| f.column().to_string()).collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingHeader(missing));
    }

    let mut readings = Vec::new();
    let mut report = IngestReport::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(RejectedRow {
                    row,
                    code: "Malformed".into(),
                    field: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match validate_with(|f| record.get(index[&f])) {
            Ok(reading) => {
                report.accepted += 1;
                report.device_set.insert(reading.device.clone());
                readings.push(reading);
            }
            Err(e) => report.rejected.push(RejectedRow {
                row,
                code: e.code().to_string(),
                field: Some(e.field()),
                message: e.to_string(),
            }),
        }
    }
    Ok((readings, report))
}

/// Writes readings in the tabular format, header first.
pub fn render_tabular(readings: &[TrapReading]) -> String {
    let mut out = String::from("Timestamp,Counts,Temperature,Humidity,Lat,Long,Name\n");
    for r in readings {
        let fields = r.render();
        let line: Vec<&str> = fields.iter().map(|(_, v)| v.as_str()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_recording_filename(name: &str, kind: RecordingKind) -> Result<RecordingName, FilenameError> {
    let mismatch = || FilenameError::GrammarMismatch { kind, name: name.to_string() };

    let body = name.strip_prefix("F_").ok_or_else(mismatch)?;
    let (stem, ext) = body.rsplit_once('.').ok_or_else(mismatch)?;
    let format = match (kind, ext) {
        (RecordingKind::Vibration, "mp3") => MediaFormat::Mp3,
        (RecordingKind::Vibration | RecordingKind::Wingbeat, "wav") => MediaFormat::Wav,
        (RecordingKind::Image, "jpg") => MediaFormat::Jpeg,
        _ => return Err(mismatch()),
    };

    let parts: Vec<&str> = stem.split('_').collect();
    let expected_parts = if kind == RecordingKind::Wingbeat { 5 } else { 2 };
    if parts.len() != expected_parts {
        return Err(mismatch());
    }

    let digits = parts[0];
    if digits.len() != 14 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(mismatch());
    }
    let field = |a: usize, b: usize| digits[a..b].parse::<u32>().expect("ascii digits");
    let invalid = || FilenameError::InvalidDate { name: name.to_string() };
    let date = NaiveDate::from_ymd_opt(field(0, 4) as i32, field(4, 6), field(6, 8)).ok_or_else(invalid)?;
    let time = NaiveTime::from_hms_opt(field(8, 10), field(10, 12), field(12, 14)).ok_or_else(invalid)?;

    let serial_text = parts[1];
    if serial_text.is_empty() || !serial_text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(mismatch());
    }
    let serial: u32 = serial_text.parse().map_err(|_| mismatch())?;

    let (temperature, humidity, optical_intensity) = if kind == RecordingKind::Wingbeat {
        let t = fixed_point(parts[2].strip_prefix("Temp").ok_or_else(mismatch)?, 1, true).ok_or_else(mismatch)?;
        let h = fixed_point(parts[3].strip_prefix("Hum").ok_or_else(mismatch)?, 1, false).ok_or_else(mismatch)?;
        let o = fixed_point(parts[4].strip_prefix("Opt").ok_or_else(mismatch)?, 2, false).ok_or_else(mismatch)?;
        (Some(t), Some(h), Some(o))
    } else {
        (None, None, None)
    };

    let parsed = RecordingName {
        kind,
        format,
        timestamp: date.and_time(time),
        serial,
        temperature,
        humidity,
        optical_intensity,
        filename: name.to_string(),
    };
    // Leading zeros or widths the renderer would not reproduce are rejected here
    // so that every accepted name round-trips.
    match render_fields(&parsed) {
        Ok(rendered) if rendered == name => Ok(parsed),
        _ => Err(mismatch()),
    }
}

fn fixed_point(text: &str, decimals: usize, signed: bool) -> Option<f64> {
    let unsigned = if signed { text.strip_prefix('-').unwrap_or(text) } else { text };
    let (int, frac) = unsigned.split_once('.')?;
    if int.is_empty() || frac.len() != decimals {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

/// Renders the canonical filename for the given fields; the result re-parses
/// to the same fields.
pub fn render_recording_filename(name: &RecordingName) -> Result<String, FilenameError> {
    let rendered = render_fields(name)?;
    let reparsed =
        parse_recording_filename(&rendered, name.kind).map_err(|e| FilenameError::InconsistentFields(e.to_string()))?;
    let same = reparsed.timestamp == name.timestamp
        && reparsed.serial == name.serial
        && reparsed.format == name.format
        && reparsed.temperature == name.temperature
        && reparsed.humidity == name.humidity
        && reparsed.optical_intensity == name.optical_intensity;
    if !same {
        return Err(FilenameError::InconsistentFields(format!(
            "fields are not representable at the fixed widths of {rendered:?}"
        )));
    }
    Ok(rendered)
}

fn render_fields(name: &RecordingName) -> Result<String, FilenameError> {
    let inconsistent = |msg: &str| Err(FilenameError::InconsistentFields(msg.to_string()));
    let ts = name.timestamp;
    if !(1000..=9999).contains(&ts.year()) {
        return inconsistent("year must have four digits");
    }
    if ts.nanosecond() != 0 {
        return inconsistent("timestamps carry whole seconds");
    }
    let stamp = ts.format("%Y%m%d%H%M%S");
    let ext = name.format.extension();
    match name.kind {
        RecordingKind::Vibration | RecordingKind::Image => {
            let format_ok = match name.kind {
                RecordingKind::Vibration => matches!(name.format, MediaFormat::Mp3 | MediaFormat::Wav),
                _ => name.format == MediaFormat::Jpeg,
            };
            if !format_ok {
                return inconsistent("media format does not match recording kind");
            }
            if name.temperature.is_some() || name.humidity.is_some() || name.optical_intensity.is_some() {
                return inconsistent("environmental fields belong to wingbeat recordings only");
            }
            Ok(format!("F_{stamp}_{}.{ext}", name.serial))
        }
        RecordingKind::Wingbeat => {
            if name.format != MediaFormat::Wav {
                return inconsistent("wingbeat recordings are WAV files");
            }
            let (Some(t), Some(h), Some(o)) = (name.temperature, name.humidity, name.optical_intensity) else {
                return inconsistent("wingbeat recordings need temperature, humidity and optical intensity");
            };
            if !t.is_finite() || !(h.is_finite() && h >= 0.0) || !(o.is_finite() && o >= 0.0) {
                return inconsistent("environmental fields must be finite and non-negative where required");
            }
            Ok(format!("F_{stamp}_{:04}_Temp{t:.1}_Hum{h:.1}_Opt{o:05.2}.{ext}", name.serial))
        }
    }
}
