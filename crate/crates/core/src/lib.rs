//! Core library for an automated insect-trap fleet: the telemetry model,
//! CSV and filename parsers, a durable store, analytics over trap counts and
//! signal processing for acoustic recordings, plus a seeded synthetic
//! generator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod dsp;
pub mod ingest;
pub mod model;
pub mod store;
pub mod synth;

use serde::Serialize;

/// Serializes with object keys sorted and floats in shortest round-trip form,
/// so equal values always produce equal bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&canonicalize(serde_json::to_value(value)?))
}

/// Rebuilds every object with its keys in sorted order.
pub fn canonicalize(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonicalize(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}
