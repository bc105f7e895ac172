//! Typed access to string query parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use trapnet_core::ingest::parse_timestamp;
use trapnet_core::model::{BoundingBox, DeviceId, TimeRange};

use crate::error::ApiError;

#[derive(Debug, Clone, Default)]
pub struct Params(pub BTreeMap<String, String>);

impl Params {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        Params(map)
    }

    /// Flattens a JSON argument object the way a query string carries it:
    /// arrays become comma lists, nulls are dropped.
    pub fn from_json(args: &serde_json::Value) -> Result<Self, ApiError> {
        use serde_json::Value;
        fn scalar(v: &Value) -> Option<String> {
            match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                Value::Bool(b) => Some(b.to_string()),
                _ => None,
            }
        }
        let obj = args
            .as_object()
            .ok_or_else(|| ApiError::new(400, "invalid_arguments", None, "arguments must be an object"))?;
        let mut out = BTreeMap::new();
        for (k, v) in obj {
            let text = match v {
                Value::Null => continue,
                Value::Array(items) => {
                    let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
                    parts.ok_or_else(|| ApiError::bad_param(k, "array items must be scalars"))?.join(",")
                }
                other => scalar(other).ok_or_else(|| ApiError::bad_param(k, "nested objects are not accepted"))?,
            };
            out.insert(k.clone(), text);
        }
        Ok(Params(out))
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str).filter(|s| !s.trim().is_empty())
    }

    /// Fails on any parameter not in `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<(), ApiError> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ApiError::new(400, "unknown_parameter", Some(k), format!("unknown parameter {k:?}"))),
            None => Ok(()),
        }
    }

    pub fn parsed<T: FromStr>(&self, name: &str) -> Result<Option<T>, ApiError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(name)
            .map(|s| s.trim().parse::<T>().map_err(|e| ApiError::bad_param(name, format!("{name}: {e}"))))
            .transpose()
    }

    pub fn f64_in(&self, name: &str, default: Option<f64>, lo: f64, hi: f64) -> Result<f64, ApiError> {
        let v = match self.parsed::<f64>(name)? {
            Some(v) => v,
            None => default.ok_or_else(|| ApiError::missing(name))?,
        };
        if !v.is_finite() || v < lo || v > hi {
            return Err(ApiError::bad_param(name, format!("{name} must be between {lo} and {hi}")));
        }
        Ok(v)
    }

    pub fn usize_in(&self, name: &str, default: usize, lo: usize, hi: usize) -> Result<usize, ApiError> {
        let v = self.parsed::<usize>(name)?.unwrap_or(default);
        if v < lo || v > hi {
            return Err(ApiError::bad_param(name, format!("{name} must be between {lo} and {hi}")));
        }
        Ok(v)
    }

    pub fn device(&self, name: &str) -> Result<Option<DeviceId>, ApiError> {
        Ok(self.raw(name).map(|s| DeviceId::new(s.trim())))
    }

    pub fn required_device(&self, name: &str) -> Result<DeviceId, ApiError> {
        self.device(name)?.ok_or_else(|| ApiError::missing(name))
    }

    pub fn devices(&self, name: &str) -> Result<Vec<DeviceId>, ApiError> {
        Ok(self
            .raw(name)
            .map(|s| s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(DeviceId::new).collect())
            .unwrap_or_default())
    }

    /// `lat_min,lat_max,long_min,long_max`.
    pub fn bbox(&self, name: &str) -> Result<Option<BoundingBox>, ApiError> {
        let Some(raw) = self.raw(name) else { return Ok(None) };
        let parts: Result<Vec<f64>, _> = raw.split(',').map(|p| p.trim().parse::<f64>()).collect();
        let bad = || ApiError::bad_param(name, "expected lat_min,lat_max,long_min,long_max");
        match parts.map_err(|_| bad())?.as_slice() {
            &[a, b, c, d] if [a, b, c, d].iter().all(|v| v.is_finite()) => {
                BoundingBox::new(a, b, c, d).map(Some).map_err(|e| ApiError::bad_param(name, e.to_string()))
            }
            _ => Err(bad()),
        }
    }

    /// Comma-separated hours; `a-b` ranges wrap past midnight (`21-4`).
    pub fn hours(&self, name: &str) -> Result<Option<BTreeSet<u32>>, ApiError> {
        let Some(raw) = self.raw(name) else { return Ok(None) };
        let bad =
            |p: &str| ApiError::bad_param(name, format!("invalid hour {p:?}; use values 0-23 or ranges like 21-4"));
        let hour = |p: &str| p.trim().parse::<u32>().ok().filter(|h| *h <= 23).ok_or_else(|| bad(p));
        let mut out = BTreeSet::new();
        for part in raw.split(',').filter(|p| !p.trim().is_empty()) {
            match part.split_once('-') {
                Some((a, b)) => {
                    let (mut h, end) = (hour(a)?, hour(b)?);
                    loop {
                        out.insert(h);
                        if h == end {
                            break;
                        }
                        h = (h + 1) % 24;
                    }
                }
                None => {
                    out.insert(hour(part)?);
                }
            }
        }
        if out.is_empty() {
            return Err(bad(raw));
        }
        Ok(Some(out))
    }

    /// Timestamps in the table format, ISO date-times or plain dates.
    pub fn time(&self, name: &str) -> Result<Option<NaiveDateTime>, ApiError> {
        let Some(raw) = self.raw(name) else { return Ok(None) };
        let raw = raw.trim();
        if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
            return Ok(Some(d.and_hms_opt(0, 0, 0).expect("midnight")));
        }
        parse_timestamp(raw).map(Some).map_err(|e| ApiError::bad_param(name, e.to_string()))
    }

    pub fn time_range(&self, start: &str, end: &str) -> Result<Option<TimeRange>, ApiError> {
        match (self.time(start)?, self.time(end)?) {
            (None, None) => Ok(None),
            (s, e) => {
                let s = s.unwrap_or(NaiveDateTime::MIN);
                let e = e.unwrap_or(NaiveDateTime::MAX);
                TimeRange::new(s, e).map(Some).map_err(|_| ApiError::bad_param(start, "start must precede end"))
            }
        }
    }
}
