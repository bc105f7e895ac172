//! The callable operations: one table drives the manifest, the HTTP
//! analytics routes and `trapnet analyze`.

use serde_json::{json, Map, Value};

use trapnet_core::analytics::{
    adjacency, aggregate_counts, binned_response, circadian_matrix, correlation_matrix, device_positions, extremes,
    heat_points, hourly_outliers, hourly_profile, nearest_traps, night_hours, pearson_test, region_weekly_stats,
    similarity_report, temperature_distribution, top_n_daily_mean, unique_locations, BinVariable, Granularity,
};
use trapnet_core::dsp::{analyze, decode_audio, AnalysisOp, AnalysisParams, AudioDecoder, ImpulseParams, WelchParams};
use trapnet_core::model::{BoundingBox, DeviceId, GeoPoint, Metric, RecordingKind, TrapReading};
use trapnet_core::store::{ReadingFilter, Snapshot, Store};

use crate::error::ApiError;
use crate::params::Params;

pub const MANIFEST_VERSION: &str = "1.0.0";

pub const DEFAULT_GRANULARITY: &str = "day";
pub const DEFAULT_THRESHOLD_KM: f64 = 1.0;
pub const DEFAULT_TOP_N: usize = 10;
pub const DEFAULT_METRIC: &str = "counts";
pub const DEFAULT_MIN_WEEKLY: u64 = 100;
pub const DEFAULT_OUTLIER_K: f64 = 3.0;
pub const DEFAULT_NEAREST_K: usize = 3;
pub const DEFAULT_VARIABLE: &str = "temperature";
pub const DEFAULT_BUCKET: &str = "day";
const MAX_COUNT: usize = 100_000;
const MAX_DISTANCE_KM: f64 = 20_100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Query,
    Path,
}

#[derive(Debug, Clone)]
pub struct ToolParam {
    pub name: &'static str,
    pub required: bool,
    pub location: Location,
    pub schema: Value,
}

#[derive(Debug, Clone)]
pub struct Tool {
    pub name: &'static str,
    pub description: &'static str,
    pub endpoint: &'static str,
    pub params: Vec<ToolParam>,
    pub result: Value,
}

impl Tool {
    pub fn param_names(&self) -> Vec<&'static str> {
        self.params.iter().map(|p| p.name).collect()
    }

    /// JSON Schema for the argument object.
    pub fn parameters_schema(&self) -> Value {
        let mut props = Map::new();
        for p in &self.params {
            let mut s = p.schema.clone();
            if p.location == Location::Path {
                s["x-in"] = json!("path");
            }
            props.insert(p.name.to_string(), s);
        }
        let required: Vec<&str> = self.params.iter().filter(|p| p.required).map(|p| p.name).collect();
        json!({"type": "object", "properties": props, "required": required, "additionalProperties": false})
    }

    pub fn is_analytics(&self) -> bool {
        self.endpoint.starts_with("/api/analytics/")
    }
}

fn param(name: &'static str, required: bool, schema: Value) -> ToolParam {
    ToolParam { name, required, location: Location::Query, schema }
}

fn described(mut schema: Value, semantic: &str, description: &str) -> Value {
    schema["x-semantic"] = json!(semantic);
    schema["description"] = json!(description);
    schema
}

fn number(lo: f64, hi: f64, default: Option<f64>) -> Value {
    let mut s = json!({"type": "number", "minimum": lo, "maximum": hi});
    if let Some(d) = default {
        s["default"] = json!(d);
    }
    s
}

fn integer(lo: u64, hi: u64, default: Option<u64>) -> Value {
    let mut s = json!({"type": "integer", "minimum": lo, "maximum": hi});
    if let Some(d) = default {
        s["default"] = json!(d);
    }
    s
}

fn choice(options: &[&str], default: Option<&str>) -> Value {
    let mut s = json!({"type": "string", "enum": options});
    if let Some(d) = default {
        s["default"] = json!(d);
    }
    s
}

fn device_param(name: &'static str, description: &str) -> ToolParam {
    param(name, true, described(json!({"type": "string", "minLength": 1}), "device_id", description))
}

fn bbox_param(required: bool, description: &str) -> ToolParam {
    let s = json!({"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4});
    param("bbox", required, described(s, "bbox", description))
}

fn scope_params() -> Vec<ToolParam> {
    let ts = json!({"type": "string", "minLength": 1});
    vec![
        param(
            "start",
            false,
            described(
                ts.clone(),
                "timestamp",
                "Only readings at or after this time (YYYY-MM-DD, YYYY-MM-DDTHH:MM or DD-MM-YY H:MM).",
            ),
        ),
        param("end", false, described(ts, "timestamp", "Only readings before this time.")),
    ]
}

fn with_scope(mut params: Vec<ToolParam>) -> Vec<ToolParam> {
    params.extend(scope_params());
    params
}

// result schema helpers
fn r_num() -> Value {
    json!({"type": "number"})
}
fn r_int() -> Value {
    json!({"type": "integer", "minimum": 0})
}
fn r_str() -> Value {
    json!({"type": "string"})
}
fn r_null(s: Value) -> Value {
    json!({"anyOf": [s, {"type": "null"}]})
}
fn r_arr(s: Value) -> Value {
    json!({"type": "array", "items": s})
}
fn r_obj(fields: &[(&str, Value)]) -> Value {
    let props: Map<String, Value> = fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    let required: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
    json!({"type": "object", "properties": props, "required": required})
}
fn r_geo() -> Value {
    r_obj(&[("lat", r_num()), ("long", r_num())])
}
fn r_stat() -> Value {
    r_obj(&[
        ("kind", json!({"enum": ["ANOVA_F", "TwoSampleT", "PearsonR"]})),
        ("statistic", r_num()),
        ("df", r_arr(r_int())),
        ("p_value", r_num()),
    ])
}
fn r_mean_std() -> Value {
    r_obj(&[("mean", r_num()), ("std", r_null(r_num())), ("n", r_int())])
}
fn r_spectrum() -> Value {
    r_obj(&[("frequencies", r_arr(r_num())), ("magnitudes", r_arr(r_num()))])
}

fn hours_schema() -> Value {
    let default: Vec<u32> = night_hours_ordered();
    json!({"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 23}, "minItems": 1, "uniqueItems": true, "default": default})
}

// 21..23 then 0..4, the way a night reads
fn night_hours_ordered() -> Vec<u32> {
    let mut h: Vec<u32> = night_hours().into_iter().collect();
    h.sort_by_key(|&x| (x < 12, x));
    h
}

pub fn tools() -> Vec<Tool> {
    let period = r_obj(&[("device", r_str()), ("position", r_geo()), ("period_start", r_str()), ("total", r_int())]);
    vec![
        Tool {
            name: "extremes",
            description: "Device and period with the highest and the lowest insect count, per hour, day or ISO week.",
            endpoint: "/api/analytics/extremes",
            params: with_scope(vec![param(
                "granularity",
                false,
                described(choice(&["hour", "day", "week"], Some(DEFAULT_GRANULARITY)), "granularity", "Period length. Hour compares raw rows."),
            )]),
            result: r_obj(&[("granularity", json!({"enum": ["Hour", "Day", "Week"]})), ("highest", period.clone()), ("lowest", period)]),
        },
        Tool {
            name: "adjacent",
            description: "Pairs of traps within a distance of each other, with a one-way ANOVA of the hourly counts of the paired traps.",
            endpoint: "/api/analytics/adjacent",
            params: with_scope(vec![param(
                "threshold_km",
                false,
                described(number(0.0, MAX_DISTANCE_KM, Some(DEFAULT_THRESHOLD_KM)), "kilometers", "Maximum great-circle distance between the two traps of a pair."),
            )]),
            result: r_obj(&[
                ("threshold_km", r_num()),
                ("pairs", r_arr(r_obj(&[("device_a", r_str()), ("device_b", r_str()), ("distance_km", r_num())]))),
                ("groups", r_arr(r_str())),
                ("anova", r_null(r_stat())),
                ("anova_error", r_null(r_str())),
            ]),
        },
        Tool {
            name: "top",
            description: "Traps ranked by mean daily insect count, highest first.",
            endpoint: "/api/analytics/top",
            params: with_scope(vec![param(
                "n",
                false,
                described(integer(1, MAX_COUNT as u64, Some(DEFAULT_TOP_N as u64)), "count", "How many traps to return."),
            )]),
            result: r_arr(r_obj(&[("device", r_str()), ("mean_daily_total", r_num()), ("days", r_int())])),
        },
        Tool {
            name: "circadian",
            description: "Hour-of-day by calendar-day matrix of summed counts or mean temperature or humidity, with a colour scale hint.",
            endpoint: "/api/analytics/circadian",
            params: with_scope(vec![param(
                "metric",
                false,
                described(choice(&["counts", "temperature", "humidity"], Some(DEFAULT_METRIC)), "metric", "Quantity shown in each cell."),
            )]),
            result: r_obj(&[
                ("metric", json!({"enum": ["Counts", "Temperature", "Humidity"]})),
                ("rows", r_arr(r_int())),
                ("cols", r_arr(r_str())),
                ("cells", r_arr(r_arr(r_null(r_num())))),
                ("scale_hint", r_null(json!({"type": "array", "items": r_num(), "minItems": 2, "maxItems": 2}))),
            ]),
        },
        Tool {
            name: "locations",
            description: "Distinct trap locations with the devices seen at each.",
            endpoint: "/api/analytics/locations",
            params: scope_params(),
            result: r_arr(r_obj(&[("position", r_geo()), ("devices", r_arr(r_str()))])),
        },
        Tool {
            name: "heatpoints",
            description: "One point per trap location inside a bounding box, weighted by total insect count.",
            endpoint: "/api/analytics/heatpoints",
            params: with_scope(vec![bbox_param(false, "lat_min, lat_max, long_min, long_max. Defaults to the whole globe.")]),
            result: r_arr(r_obj(&[("position", r_geo()), ("weight", r_int())])),
        },
        Tool {
            name: "region-weekly-stats",
            description: "Mean and standard deviation of temperature and humidity over the device-weeks inside a bounding box whose weekly count exceeds a minimum.",
            endpoint: "/api/analytics/region-weekly-stats",
            params: with_scope(vec![
                bbox_param(true, "lat_min, lat_max, long_min, long_max."),
                param(
                    "min_weekly",
                    false,
                    described(integer(0, u32::MAX as u64, Some(DEFAULT_MIN_WEEKLY)), "count", "A device-week qualifies when its total is strictly greater than this."),
                ),
            ]),
            result: r_obj(&[("qualifying_weeks", r_int()), ("temperature", r_mean_std()), ("humidity", r_mean_std())]),
        },
        Tool {
            name: "outliers",
            description: "Hourly counts of one trap that exceed the mean of that hour of day by more than k sample standard deviations.",
            endpoint: "/api/analytics/outliers",
            params: with_scope(vec![
                device_param("device", "Trap to inspect."),
                param("hours", false, described(hours_schema(), "hour_set", "Hours of day analysed, each independently. Defaults to 21:00-04:00.")),
                param("k", false, described(number(0.0, 1000.0, Some(DEFAULT_OUTLIER_K)), "std_multiplier", "Threshold in standard deviations above the hour mean.")),
            ]),
            result: r_arr(r_obj(&[
                ("device", r_str()),
                ("timestamp", r_str()),
                ("counts", r_int()),
                ("hour", r_int()),
                ("z_score", r_num()),
                ("hour_mean", r_num()),
                ("hour_std", r_num()),
            ])),
        },
        Tool {
            name: "similarity",
            description: "Pearson correlation, two-sample t-test and Fourier spectra of the daily counts of two traps over their common days.",
            endpoint: "/api/analytics/similarity",
            params: with_scope(vec![device_param("device_a", "First trap."), device_param("device_b", "Second trap.")]),
            result: r_obj(&[
                ("device_a", r_str()),
                ("device_b", r_str()),
                ("common_days", r_arr(r_str())),
                ("pearson_r", r_null(r_num())),
                ("t_test", r_stat()),
                ("spectrum_a", r_spectrum()),
                ("spectrum_b", r_spectrum()),
            ]),
        },
        Tool {
            name: "nearest",
            description: "The k traps closest to a point, nearest first, with great-circle distances in km.",
            endpoint: "/api/analytics/nearest",
            params: with_scope(vec![
                param("lat", true, described(number(-90.0, 90.0, None), "latitude", "Latitude of the point, decimal degrees.")),
                param("long", true, described(number(-180.0, 180.0, None), "longitude", "Longitude of the point, decimal degrees.")),
                param("k", false, described(integer(1, MAX_COUNT as u64, Some(DEFAULT_NEAREST_K as u64)), "count", "How many traps to return.")),
            ]),
            result: r_arr(r_obj(&[("device", r_str()), ("position", r_geo()), ("distance_km", r_num())])),
        },
        Tool {
            name: "binned",
            description: "Mean insect count per temperature bin (<10, 10-20, 20-30, >=30 C) or per 10% humidity bin.",
            endpoint: "/api/analytics/binned",
            params: with_scope(vec![param(
                "variable",
                false,
                described(choice(&["temperature", "humidity"], Some(DEFAULT_VARIABLE)), "variable", "Variable to bin by."),
            )]),
            result: r_obj(&[
                ("variable", json!({"enum": ["Temperature", "Humidity"]})),
                ("bin_edges", r_arr(r_null(r_num()))),
                ("bin_labels", r_arr(r_str())),
                ("mean_counts", r_arr(r_null(r_num()))),
                ("n", r_arr(r_int())),
            ]),
        },
        Tool {
            name: "hourly-profile",
            description: "Mean counts, temperature and humidity for each hour of the day.",
            endpoint: "/api/analytics/hourly-profile",
            params: scope_params(),
            result: r_obj(&[(
                "hours",
                json!({"type": "array", "minItems": 24, "maxItems": 24, "items": r_obj(&[
                    ("hour", r_int()),
                    ("n", r_int()),
                    ("mean_counts", r_null(r_num())),
                    ("mean_temperature", r_null(r_num())),
                    ("mean_humidity", r_null(r_num())),
                ])}),
            )]),
        },
        Tool {
            name: "temperature-distribution",
            description: "Minimum, quartiles and maximum of the temperature recorded by each trap.",
            endpoint: "/api/analytics/temperature-distribution",
            params: scope_params(),
            result: r_arr(r_obj(&[
                ("device", r_str()),
                ("summary", r_obj(&[("min", r_num()), ("q1", r_num()), ("median", r_num()), ("q3", r_num()), ("max", r_num())])),
            ])),
        },
        Tool {
            name: "correlation",
            description: "Pearson correlation between two reading variables with its t-based p-value, optionally for a single trap.",
            endpoint: "/api/analytics/correlation",
            params: with_scope(vec![
                param("x", false, described(choice(&["counts", "temperature", "humidity"], Some("temperature")), "metric", "First variable.")),
                param("y", false, described(choice(&["counts", "temperature", "humidity"], Some("humidity")), "metric", "Second variable.")),
                param("device", false, described(json!({"type": "string", "minLength": 1}), "device_id", "Restrict to one trap.")),
            ]),
            result: r_stat(),
        },
        Tool {
            name: "aggregate",
            description: "Per-trap insect counts summed into hourly, daily or ISO-weekly buckets; empty buckets are zero.",
            endpoint: "/api/analytics/aggregate",
            params: with_scope(vec![
                param("bucket", false, described(choice(&["hour", "day", "week"], Some(DEFAULT_BUCKET)), "granularity", "Bucket length.")),
                param("devices", false, described(json!({"type": "array", "items": {"type": "string", "minLength": 1}}), "device_list", "Traps to include. Defaults to all.")),
            ]),
            result: r_arr(r_obj(&[
                ("device", r_str()),
                ("bucket", json!({"enum": ["Hour", "Day", "Week"]})),
                ("points", r_arr(r_obj(&[("start", r_str()), ("total", r_int())]))),
            ])),
        },
        Tool {
            name: "correlation-matrix",
            description: "Pairwise Pearson correlation of hourly counts between traps, aligned on shared timestamps.",
            endpoint: "/api/analytics/correlation-matrix",
            params: with_scope(vec![param(
                "devices",
                false,
                described(json!({"type": "array", "items": {"type": "string", "minLength": 1}}), "device_list", "Traps to compare. Defaults to all."),
            )]),
            result: r_obj(&[
                ("devices", r_arr(r_str())),
                ("values", r_arr(r_arr(r_null(r_num())))),
                ("overlap", r_arr(r_arr(r_int()))),
            ]),
        },
        dsp_tool(),
    ]
}

fn dsp_tool() -> Tool {
    let ops: Vec<&str> = AnalysisOp::ALL.iter().map(|o| o.as_str()).collect();
    let d = AnalysisParams::default();
    Tool {
        name: "dsp-analysis",
        description: "Signal analysis of a stored wingbeat or vibration recording: power spectrum, spectrogram, fundamental frequency, mosquito sex, impulse train and infestation verdict.",
        endpoint: "/api/dsp/{id}/analysis",
        params: vec![
            ToolParam {
                name: "id",
                required: true,
                location: Location::Path,
                schema: described(integer(0, u64::MAX >> 11, None), "recording_id", "Recording id returned by the upload or the recording list."),
            },
            param(
                "ops",
                false,
                described(
                    json!({"type": "array", "items": {"type": "string", "enum": ops}, "minItems": 1, "uniqueItems": true}),
                    "dsp_ops",
                    "Operations to run. Defaults to psd, fundamental and classify for wingbeat recordings and spectrogram and impulses for vibration recordings.",
                ),
            ),
            param("segment", false, described(integer(16, 1 << 20, Some(d.welch.segment as u64)), "samples", "Welch segment length.")),
            param("overlap", false, described(number(0.0, 0.95, Some(d.welch.overlap)), "fraction", "Welch segment overlap.")),
            param("frame", false, described(integer(2, 1 << 20, Some(d.frame as u64)), "samples", "Spectrogram frame length.")),
            param("hop", false, described(integer(1, 1 << 20, Some(d.hop as u64)), "samples", "Spectrogram hop.")),
            param("band_lo", false, described(number(0.0, 1e6, Some(d.band.0)), "hertz", "Lower edge of the fundamental search band.")),
            param("band_hi", false, described(number(0.0, 1e6, Some(d.band.1)), "hertz", "Upper edge of the fundamental search band.")),
            param("k_mad", false, described(number(0.0, 1000.0, Some(d.impulses.k_mad)), "std_multiplier", "Impulse threshold in median absolute deviations.")),
            param("min_rate_per_min", false, described(number(0.0, 1e6, Some(d.min_rate_per_min)), "rate", "Impulse rate per minute at or above which a recording is called infested.")),
        ],
        result: r_obj(&[
            ("sample_rate", r_int()),
            ("duration_s", r_num()),
            ("psd", r_null(r_obj(&[("frequencies", r_arr(r_num())), ("power", r_arr(r_num()))]))),
            ("spectrogram", r_null(r_obj(&[("times", r_arr(r_num())), ("frequencies", r_arr(r_num())), ("magnitudes", r_arr(r_arr(r_num())))]))),
            ("fundamental_hz", r_null(r_num())),
            ("harmonics_hz", r_arr(r_num())),
            ("sex", r_null(json!({"enum": ["Female", "Male", "Unknown"]}))),
            (
                "impulses",
                r_null(r_obj(&[
                    ("impulse_times", r_arr(r_num())),
                    ("impulse_rate_per_min", r_num()),
                    ("infested", r_null(json!({"type": "boolean"}))),
                    ("threshold_used", r_num()),
                ])),
            ),
            ("infestation", r_null(r_obj(&[("infested", json!({"type": "boolean"})), ("confidence", r_num())]))),
        ]),
    }
}

pub fn find(name: &str) -> Option<Tool> {
    tools().into_iter().find(|t| t.name == name)
}

pub fn manifest() -> Value {
    let tools: Vec<Value> = tools()
        .iter()
        .map(|t| {
            json!({
                "name": t.name,
                "description": t.description,
                "method": "GET",
                "endpoint": t.endpoint,
                "parameters": t.parameters_schema(),
                "result": t.result,
            })
        })
        .collect();
    json!({
        "version": MANIFEST_VERSION,
        "server_version": env!("CARGO_PKG_VERSION"),
        "meta_schema": "/api/tools/manifest/schema",
        "tools": tools,
    })
}

/// Schema every manifest must satisfy.
pub fn meta_schema() -> Value {
    let param = json!({
        "type": "object",
        "required": ["description", "x-semantic"],
        "properties": {
            "type": {"enum": ["string", "number", "integer", "array", "boolean"]},
            "description": {"type": "string", "minLength": 1},
            "x-semantic": {"type": "string", "minLength": 1},
            "x-in": {"enum": ["path", "query"]},
        },
        "anyOf": [{"required": ["type"]}, {"required": ["enum"]}],
    });
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "trapnet tool manifest",
        "type": "object",
        "required": ["version", "tools"],
        "properties": {
            "version": {"type": "string", "pattern": "^[0-9]+\\.[0-9]+\\.[0-9]+$"},
            "server_version": {"type": "string"},
            "meta_schema": {"type": "string"},
            "tools": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["name", "description", "method", "endpoint", "parameters", "result"],
                    "additionalProperties": false,
                    "properties": {
                        "name": {"type": "string", "pattern": "^[a-z][a-z0-9-]*$"},
                        "description": {"type": "string", "minLength": 1},
                        "method": {"enum": ["GET"]},
                        "endpoint": {"type": "string", "pattern": "^/api/"},
                        "parameters": {
                            "type": "object",
                            "required": ["type", "properties", "required", "additionalProperties"],
                            "properties": {
                                "type": {"const": "object"},
                                "properties": {"type": "object", "additionalProperties": param},
                                "required": {"type": "array", "items": {"type": "string"}, "uniqueItems": true},
                                "additionalProperties": {"const": false},
                            },
                        },
                        "result": {"type": "object"},
                    },
                },
            },
        },
    })
}

/// Runs tool `name` against one consistent view of `store`.
pub fn execute(store: &Store, decoder: Option<&dyn AudioDecoder>, name: &str, p: &Params) -> Result<Value, ApiError> {
    let tool = find(name).ok_or_else(|| ApiError::not_found("tool", format!("unknown tool {name:?}")))?;
    p.only(&tool.param_names())?;
    if name == "dsp-analysis" {
        return dsp_analysis(store, decoder, p);
    }
    store.with_snapshot(|snap| analytics(snap, name, p))
}

fn to_value<T: serde::Serialize>(v: T) -> Result<Value, ApiError> {
    serde_json::to_value(v).map_err(|e| ApiError::new(500, "serialization_failure", None, e.to_string()))
}

fn scoped(snap: &Snapshot<'_>, p: &Params) -> Result<Vec<TrapReading>, ApiError> {
    let filter = ReadingFilter { time_range: p.time_range("start", "end")?, ..Default::default() };
    Ok(snap.query_readings(&filter))
}

fn known_device(snap: &Snapshot<'_>, p: &Params, name: &str) -> Result<DeviceId, ApiError> {
    let id = p.required_device(name)?;
    if snap.device(&id).is_none() {
        return Err(ApiError::new(404, "unknown_device", Some(name), format!("unknown device {id}")));
    }
    Ok(id)
}

fn parse_enum<T: std::str::FromStr<Err = String>>(p: &Params, name: &str, default: &str) -> Result<T, ApiError> {
    p.raw(name).unwrap_or(default).trim().parse::<T>().map_err(|e| ApiError::bad_param(name, e))
}

fn metric_values(readings: &[TrapReading], m: Metric) -> Vec<f64> {
    readings
        .iter()
        .map(|r| match m {
            Metric::Counts => r.counts as f64,
            Metric::Temperature => r.temperature,
            Metric::Humidity => r.humidity,
        })
        .collect()
}

fn analytics(snap: &Snapshot<'_>, name: &str, p: &Params) -> Result<Value, ApiError> {
    let rows = scoped(snap, p)?;
    match name {
        "extremes" => to_value(extremes(&rows, parse_enum::<Granularity>(p, "granularity", DEFAULT_GRANULARITY)?)?),
        "adjacent" => {
            to_value(adjacency(&rows, p.f64_in("threshold_km", Some(DEFAULT_THRESHOLD_KM), 0.0, MAX_DISTANCE_KM)?))
        }
        "top" => to_value(top_n_daily_mean(&rows, p.usize_in("n", DEFAULT_TOP_N, 1, MAX_COUNT)?)),
        "circadian" => to_value(circadian_matrix(&rows, parse_enum::<Metric>(p, "metric", DEFAULT_METRIC)?)),
        "locations" => to_value(unique_locations(&rows)),
        "heatpoints" => {
            let bbox = match p.bbox("bbox")? {
                Some(b) => b,
                None => BoundingBox::new(-90.0, 90.0, -180.0, 180.0).expect("globe"),
            };
            to_value(heat_points(&rows, &bbox))
        }
        "region-weekly-stats" => {
            let bbox = p.bbox("bbox")?.ok_or_else(|| ApiError::missing("bbox"))?;
            let min_weekly = p.parsed::<u64>("min_weekly")?.unwrap_or(DEFAULT_MIN_WEEKLY);
            to_value(region_weekly_stats(&rows, &bbox, min_weekly)?)
        }
        "outliers" => {
            let device = known_device(snap, p, "device")?;
            let hours = p.hours("hours")?.unwrap_or_else(night_hours);
            let k = p.f64_in("k", Some(DEFAULT_OUTLIER_K), 0.0, 1000.0)?;
            to_value(hourly_outliers(&rows, &device, &hours, k)?)
        }
        "similarity" => {
            let a = known_device(snap, p, "device_a")?;
            let b = known_device(snap, p, "device_b")?;
            to_value(similarity_report(&rows, &a, &b)?)
        }
        "nearest" => {
            let lat = p.f64_in("lat", None, -90.0, 90.0)?;
            let long = p.f64_in("long", None, -180.0, 180.0)?;
            let k = p.usize_in("k", DEFAULT_NEAREST_K, 1, MAX_COUNT)?;
            to_value(nearest_traps(GeoPoint { lat, long }, &device_positions(&rows), k))
        }
        "binned" => to_value(binned_response(&rows, parse_enum::<BinVariable>(p, "variable", DEFAULT_VARIABLE)?)),
        "hourly-profile" => to_value(hourly_profile(&rows)),
        "temperature-distribution" => to_value(temperature_distribution(&rows)),
        "correlation" => {
            let x = parse_enum::<Metric>(p, "x", "temperature")?;
            let y = parse_enum::<Metric>(p, "y", "humidity")?;
            let rows: Vec<TrapReading> = match p.device("device")? {
                Some(d) => {
                    known_device(snap, p, "device")?;
                    rows.into_iter().filter(|r| r.device == d).collect()
                }
                None => rows,
            };
            to_value(pearson_test(&metric_values(&rows, x), &metric_values(&rows, y))?)
        }
        "aggregate" => {
            let bucket = parse_enum::<Granularity>(p, "bucket", DEFAULT_BUCKET)?;
            let devices = p.devices("devices")?;
            let rows: Vec<TrapReading> = if devices.is_empty() {
                rows
            } else {
                rows.into_iter().filter(|r| devices.contains(&r.device)).collect()
            };
            to_value(aggregate_counts(&rows, bucket, p.time_range("start", "end")?))
        }
        "correlation-matrix" => to_value(correlation_matrix(&rows, &p.devices("devices")?)),
        other => Err(ApiError::not_found("tool", format!("unknown tool {other:?}"))),
    }
}

pub fn default_ops(kind: RecordingKind) -> Result<Vec<AnalysisOp>, ApiError> {
    match kind {
        RecordingKind::Wingbeat => Ok(vec![AnalysisOp::Psd, AnalysisOp::Fundamental, AnalysisOp::Classify]),
        RecordingKind::Vibration => Ok(vec![AnalysisOp::Spectrogram, AnalysisOp::Impulses]),
        RecordingKind::Image => {
            Err(ApiError::new(400, "unsupported_kind", Some("id"), "image recordings have no signal analysis"))
        }
    }
}

/// Reads the DSP tuning parameters, falling back to the defaults.
pub fn analysis_params(p: &Params) -> Result<AnalysisParams, ApiError> {
    let d = AnalysisParams::default();
    Ok(AnalysisParams {
        welch: WelchParams {
            segment: p.usize_in("segment", d.welch.segment, 16, 1 << 20)?,
            overlap: p.f64_in("overlap", Some(d.welch.overlap), 0.0, 0.95)?,
        },
        frame: p.usize_in("frame", d.frame, 2, 1 << 20)?,
        hop: p.usize_in("hop", d.hop, 1, 1 << 20)?,
        band: (p.f64_in("band_lo", Some(d.band.0), 0.0, 1e6)?, p.f64_in("band_hi", Some(d.band.1), 0.0, 1e6)?),
        max_harmonic: d.max_harmonic,
        impulses: ImpulseParams { k_mad: p.f64_in("k_mad", Some(d.impulses.k_mad), 0.0, 1000.0)?, ..d.impulses },
        min_rate_per_min: p.f64_in("min_rate_per_min", Some(d.min_rate_per_min), 0.0, 1e6)?,
    })
}

pub fn parse_ops(p: &Params, kind: RecordingKind) -> Result<Vec<AnalysisOp>, ApiError> {
    match p.raw("ops") {
        Some(list) => AnalysisOp::parse_list(list).map_err(|e| ApiError::bad_param("ops", e.to_string())),
        None => default_ops(kind),
    }
}

fn dsp_analysis(store: &Store, decoder: Option<&dyn AudioDecoder>, p: &Params) -> Result<Value, ApiError> {
    let id = p.parsed::<u64>("id")?.ok_or_else(|| ApiError::missing("id"))?;
    let (asset, bytes) = store.recording_payload(id)?;
    let ops = parse_ops(p, asset.name.kind)?;
    let params = analysis_params(p)?;
    let samples = decode_audio(&bytes, decoder)?;
    to_value(analyze(&samples, &ops, &params)?)
}
