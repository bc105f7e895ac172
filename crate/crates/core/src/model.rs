//! Domain types shared by every module, and validation of raw trap rows.

use std::collections::HashMap;
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::parse_timestamp;

pub const TEMPERATURE_RANGE: (f64, f64) = (-50.0, 60.0);
pub const HUMIDITY_RANGE: (f64, f64) = (0.0, 100.0);

/// Opaque device identifier. The wire format shows integers ("100", "213")
/// but nothing numeric is ever done with them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(String);

impl DeviceId {
    pub fn new(id: impl Into<String>) -> Self {
        DeviceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DeviceId {
    fn from(s: &str) -> Self {
        DeviceId(s.to_string())
    }
}

impl From<String> for DeviceId {
    fn from(s: String) -> Self {
        DeviceId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub long: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, long: f64) -> Result<Self, ValidationError> {
        check_range(Field::Lat, lat, -90.0, 90.0)?;
        check_range(Field::Long, long, -180.0, 180.0)?;
        Ok(GeoPoint { lat, long })
    }
}

/// Latitude/longitude rectangle, inclusive on every edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub long_min: f64,
    pub long_max: f64,
}

impl BoundingBox {
    pub fn new(lat_min: f64, lat_max: f64, long_min: f64, long_max: f64) -> Result<Self, ValidationError> {
        if !(lat_min <= lat_max) {
            return Err(ValidationError::OutOfRange { field: Field::Lat, value: format!("{lat_min}..{lat_max}") });
        }
        if !(long_min <= long_max) {
            return Err(ValidationError::OutOfRange { field: Field::Long, value: format!("{long_min}..{long_max}") });
        }
        Ok(BoundingBox { lat_min, lat_max, long_min, long_max })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.lat_min && p.lat <= self.lat_max && p.long >= self.long_min && p.long <= self.long_max
    }
}

/// Half-open `[start, end)` interval of civil time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl TimeRange {
    pub fn new(start: NaiveDateTime, end: NaiveDateTime) -> Result<Self, ValidationError> {
        if start >= end {
            return Err(ValidationError::OutOfRange { field: Field::Timestamp, value: format!("{start}..{end}") });
        }
        Ok(TimeRange { start, end })
    }

    pub fn contains(&self, t: NaiveDateTime) -> bool {
        t >= self.start && t < self.end
    }
}

/// The seven columns of the e-funnel tabular format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    Timestamp,
    Counts,
    Temperature,
    Humidity,
    Lat,
    Long,
    Name,
}

impl Field {
    pub const ALL: [Field; 7] =
        [Field::Timestamp, Field::Counts, Field::Temperature, Field::Humidity, Field::Lat, Field::Long, Field::Name];

    pub fn column(self) -> &'static str {
        match self {
            Field::Timestamp => "Timestamp",
            Field::Counts => "Counts",
            Field::Temperature => "Temperature",
            Field::Humidity => "Humidity",
            Field::Lat => "Lat",
            Field::Long => "Long",
            Field::Name => "Name",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("missing field {0}")]
    MissingField(Field),
    #[error("{field} out of range: {value}")]
    OutOfRange { field: Field, value: String },
    #[error("{field} is not a valid number: {value:?}")]
    Malformed { field: Field, value: String },
    #[error("malformed timestamp {0:?}")]
    MalformedTimestamp(String),
}

impl ValidationError {
    pub fn field(&self) -> Field {
        match self {
            ValidationError::MissingField(f) => *f,
            ValidationError::OutOfRange { field, .. } | ValidationError::Malformed { field, .. } => *field,
            ValidationError::MalformedTimestamp(_) => Field::Timestamp,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ValidationError::MissingField(_) => "MissingField",
            ValidationError::OutOfRange { .. } => "OutOfRange",
            ValidationError::Malformed { .. } => "Malformed",
            ValidationError::MalformedTimestamp(_) => "MalformedTimestamp",
        }
    }
}

/// One hourly row reported by an e-funnel trap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReading {
    pub timestamp: NaiveDateTime,
    pub counts: u32,
    pub temperature: f64,
    pub humidity: f64,
    pub lat: f64,
    pub long: f64,
    pub device: DeviceId,
}

impl TrapReading {
    pub fn position(&self) -> GeoPoint {
        GeoPoint { lat: self.lat, long: self.long }
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }

    pub fn hour(&self) -> u32 {
        self.timestamp.hour()
    }

    /// Renders the row back into the tabular field strings.
    pub fn render(&self) -> [(Field, String); 7] {
        [
            (Field::Timestamp, crate::ingest::render_timestamp(self.timestamp)),
            (Field::Counts, self.counts.to_string()),
            (Field::Temperature, self.temperature.to_string()),
            (Field::Humidity, self.humidity.to_string()),
            (Field::Lat, self.lat.to_string()),
            (Field::Long, self.long.to_string()),
            (Field::Name, self.device.to_string()),
        ]
    }
}

/// Validates a raw row keyed by column name.
pub fn validate_reading(raw: &HashMap<String, String>) -> Result<TrapReading, ValidationError> {
    validate_with(|f| raw.get(f.column()).map(String::as_str))
}

pub(crate) fn validate_with<'a>(get: impl Fn(Field) -> Option<&'a str>) -> Result<TrapReading, ValidationError> {
    let field = |f: Field| get(f).map(str::trim).ok_or(ValidationError::MissingField(f));

    let ts_text = field(Field::Timestamp)?;
    let timestamp = parse_timestamp(ts_text)?;

    let counts = parse_counts(field(Field::Counts)?)?;
    let temperature = parse_real(Field::Temperature, field(Field::Temperature)?)?;
    check_range(Field::Temperature, temperature, TEMPERATURE_RANGE.0, TEMPERATURE_RANGE.1)?;
    let humidity = parse_real(Field::Humidity, field(Field::Humidity)?)?;
    check_range(Field::Humidity, humidity, HUMIDITY_RANGE.0, HUMIDITY_RANGE.1)?;
    let lat = parse_real(Field::Lat, field(Field::Lat)?)?;
    let long = parse_real(Field::Long, field(Field::Long)?)?;
    GeoPoint::new(lat, long)?;

    let name = field(Field::Name)?;
    if name.is_empty() {
        return Err(ValidationError::MissingField(Field::Name));
    }

    Ok(TrapReading { timestamp, counts, temperature, humidity, lat, long, device: DeviceId::new(name) })
}

fn parse_real(field: Field, text: &str) -> Result<f64, ValidationError> {
    let v: f64 = text.parse().map_err(|_| ValidationError::Malformed { field, value: text.to_string() })?;
    if !v.is_finite() {
        return Err(ValidationError::Malformed { field, value: text.to_string() });
    }
    Ok(v)
}

// Accepts "8" and integral reals such as "8.0" (pandas exports floats).
fn parse_counts(text: &str) -> Result<u32, ValidationError> {
    let field = Field::Counts;
    if let Ok(n) = text.parse::<i64>() {
        return u32::try_from(n).map_err(|_| ValidationError::OutOfRange { field, value: text.to_string() });
    }
    let v = parse_real(field, text)?;
    if v.fract() != 0.0 {
        return Err(ValidationError::Malformed { field, value: text.to_string() });
    }
    if v < 0.0 || v > u32::MAX as f64 {
        return Err(ValidationError::OutOfRange { field, value: text.to_string() });
    }
    Ok(v as u32)
}

fn check_range(field: Field, v: f64, lo: f64, hi: f64) -> Result<(), ValidationError> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(ValidationError::OutOfRange { field, value: v.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceKind {
    EFunnel,
    TreeVibe,
    Wingbeat,
    VisionTrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub device: DeviceId,
    pub kind: DeviceKind,
    pub last_position: Option<GeoPoint>,
    pub timezone_offset_minutes: Option<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordingKind {
    Vibration,
    Wingbeat,
    Image,
}

impl RecordingKind {
    pub fn device_kind(self) -> DeviceKind {
        match self {
            RecordingKind::Vibration => DeviceKind::TreeVibe,
            RecordingKind::Wingbeat => DeviceKind::Wingbeat,
            RecordingKind::Image => DeviceKind::VisionTrap,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecordingKind::Vibration => "vibration",
            RecordingKind::Wingbeat => "wingbeat",
            RecordingKind::Image => "image",
        }
    }
}

impl std::str::FromStr for RecordingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vibration" => Ok(RecordingKind::Vibration),
            "wingbeat" => Ok(RecordingKind::Wingbeat),
            "image" => Ok(RecordingKind::Image),
            other => Err(format!("unknown recording kind {other:?}")),
        }
    }
}

/// Container format, taken from the filename extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MediaFormat {
    Mp3,
    Wav,
    Jpeg,
}

impl MediaFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MediaFormat::Mp3 => "mp3",
            MediaFormat::Wav => "wav",
            MediaFormat::Jpeg => "jpg",
        }
    }
}

/// Everything a recording filename encodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingName {
    pub kind: RecordingKind,
    pub format: MediaFormat,
    pub timestamp: NaiveDateTime,
    pub serial: u32,
    pub temperature: Option<f64>,
    pub humidity: Option<f64>,
    pub optical_intensity: Option<f64>,
    pub filename: String,
}

/// A vibration, wingbeat or image file owned by a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingAsset {
    pub device: DeviceId,
    #[serde(flatten)]
    pub name: RecordingName,
    pub payload_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierEvent {
    pub device: DeviceId,
    pub timestamp: NaiveDateTime,
    pub counts: u32,
    pub hour: u32,
    pub z_score: f64,
    pub hour_mean: f64,
    pub hour_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Counts,
    Temperature,
    Humidity,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "counts" => Ok(Metric::Counts),
            "temperature" => Ok(Metric::Temperature),
            "humidity" => Ok(Metric::Humidity),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Hour-of-day by calendar-day grid. `cells[hour][day]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMatrix {
    pub metric: Metric,
    pub rows: Vec<u32>,
    pub cols: Vec<NaiveDate>,
    pub cells: Vec<Vec<Option<f64>>>,
    pub scale_hint: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "ANOVA_F")]
    AnovaF,
    TwoSampleT,
    PearsonR,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub df: Vec<u32>,
    pub p_value: f64,
}
