mod common;

use std::collections::BTreeSet;

use serde_json::{json, Value};

use common::*;
use trapnet_core::store::Store;
use trapnet_core::synth::generate_recordings;
use trapnet_service::tools::{execute, manifest, meta_schema, tools, MANIFEST_VERSION};
use trapnet_service::Params;

const EXPECTED: [&str; 17] = [
    "extremes",
    "adjacent",
    "top",
    "circadian",
    "locations",
    "heatpoints",
    "region-weekly-stats",
    "outliers",
    "similarity",
    "nearest",
    "binned",
    "hourly-profile",
    "temperature-distribution",
    "correlation",
    "aggregate",
    "correlation-matrix",
    "dsp-analysis",
];

fn entry(name: &str) -> Value {
    manifest()["tools"].as_array().unwrap().iter().find(|t| t["name"] == name).cloned().expect(name)
}

fn params_validator(name: &str) -> jsonschema::Validator {
    jsonschema::validator_for(&entry(name)["parameters"]).unwrap()
}

/// Store with the small fleet plus the synthetic recordings; returns a wingbeat id.
fn loaded() -> (Store, u64) {
    let store = Store::in_memory();
    store.insert_readings(&small_fleet(21)).unwrap();
    let start = chrono::NaiveDate::from_ymd_opt(2023, 7, 3).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut wingbeat = None;
    for rec in generate_recordings(start, 1).unwrap() {
        let name = trapnet_core::ingest::parse_recording_filename(&rec.filename, rec.kind).unwrap();
        let asset = trapnet_core::model::RecordingAsset { device: rec.device.clone(), name, payload_ref: None };
        let id = store.register_recording(asset, &rec.wav).unwrap();
        if rec.kind == trapnet_core::model::RecordingKind::Wingbeat {
            wingbeat.get_or_insert(id);
        }
    }
    (store, wingbeat.unwrap())
}

/// Arguments that exercise each tool on `loaded()`.
fn example_args(name: &str, wingbeat: u64) -> Value {
    match name {
        "heatpoints" => json!({"bbox": [39.55, 39.7, 22.3, 22.5]}),
        "region-weekly-stats" => json!({"bbox": [39.55, 39.7, 22.3, 22.5], "min_weekly": 10}),
        "outliers" => json!({"device": "3", "hours": [21, 22, 23, 0, 1], "k": 3}),
        "similarity" => json!({"device_a": "3", "device_b": "7"}),
        "nearest" => json!({"lat": 39.6396, "long": 22.4196, "k": 3}),
        "correlation-matrix" => json!({"devices": ["1", "2", "3"]}),
        "dsp-analysis" => json!({"id": wingbeat, "ops": ["psd", "spectrogram", "fundamental", "classify", "impulses"]}),
        _ => json!({}),
    }
}

#[test]
fn manifest_validates_against_its_meta_schema() {
    let meta = meta_schema();
    jsonschema::meta::validate(&meta).expect("meta-schema is itself a valid schema");
    let m = manifest();
    let v = jsonschema::validator_for(&meta).unwrap();
    let errors: Vec<String> = v.iter_errors(&m).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
    assert_eq!(m["version"], MANIFEST_VERSION);

    for t in m["tools"].as_array().unwrap() {
        jsonschema::meta::validate(&t["parameters"]).unwrap_or_else(|e| panic!("{}: {e}", t["name"]));
        jsonschema::meta::validate(&t["result"]).unwrap_or_else(|e| panic!("{}: {e}", t["name"]));
    }

    // a broken manifest is caught
    let mut bad = m.clone();
    bad["tools"][0]["parameters"]["properties"]["granularity"].as_object_mut().unwrap().remove("x-semantic");
    assert!(!v.is_valid(&bad));
    let mut bad = m;
    bad["tools"][1]["method"] = json!("DELETE");
    assert!(!v.is_valid(&bad));
}

#[test]
fn every_operation_appears_exactly_once() {
    let m = manifest();
    let names: Vec<&str> = m["tools"].as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap()).collect();
    assert_eq!(names, EXPECTED);
    let unique: BTreeSet<&str> = names.iter().copied().collect();
    assert_eq!(unique.len(), names.len());
    let endpoints: BTreeSet<&str> =
        m["tools"].as_array().unwrap().iter().map(|t| t["endpoint"].as_str().unwrap()).collect();
    assert_eq!(endpoints.len(), names.len());
}

#[tokio::test]
async fn every_endpoint_is_routed() {
    let (app, _) = app();
    let served = get(&app, "/api/tools/manifest").await;
    assert_eq!(served.text(), canonical(&manifest()));
    let schema = get(&app, "/api/tools/manifest/schema").await;
    assert_eq!(schema.json(), meta_schema());

    for t in tools() {
        let uri = t.endpoint.replace("{id}", "0");
        let r = get(&app, &uri).await;
        // routed handlers answer with something other than the catch-all
        assert_ne!(r.json()["field"], "path", "{uri} is not routed");
    }
    let r = get(&app, "/api/analytics/not-a-tool").await;
    assert_eq!(r.status.as_u16(), 404);
}

#[test]
fn parameter_schemas_accept_documented_examples() {
    let accept = [
        ("extremes", json!({"granularity": "day"})),
        ("extremes", json!({"granularity": "week"})),
        ("adjacent", json!({"threshold_km": 1.0})),
        ("top", json!({"n": 10})),
        ("circadian", json!({"metric": "temperature"})),
        ("locations", json!({})),
        ("heatpoints", json!({"bbox": [39.2, 39.8, 22.0, 22.8]})),
        ("region-weekly-stats", json!({"bbox": [39.2, 39.8, 22.0, 22.8], "min_weekly": 100})),
        ("outliers", json!({"device": "213", "hours": [21, 22, 23, 0, 1, 2, 3, 4], "k": 3})),
        ("outliers", json!({"device": "213", "hours": [21], "k": 2.5, "start": "2023-06-01"})),
        ("similarity", json!({"device_a": "100", "device_b": "149"})),
        ("nearest", json!({"lat": 39.6396, "long": 22.4196, "k": 3})),
        ("binned", json!({"variable": "humidity"})),
        ("hourly-profile", json!({})),
        ("correlation", json!({"x": "counts", "y": "humidity", "device": "100"})),
        ("aggregate", json!({"bucket": "week", "devices": ["100", "198"]})),
        ("correlation-matrix", json!({"devices": ["100", "198", "206"]})),
        ("dsp-analysis", json!({"id": 0, "ops": ["psd", "spectrogram", "fundamental", "classify"]})),
        ("dsp-analysis", json!({"id": 3, "ops": ["impulses"]})),
    ];
    for (name, args) in accept {
        let v = params_validator(name);
        let errs: Vec<String> = v.iter_errors(&args).map(|e| e.to_string()).collect();
        assert!(errs.is_empty(), "{name} {args}: {errs:?}");
    }

    let reject = [
        ("extremes", json!({"granularity": "month"})),
        ("outliers", json!({"hours": [21]})),
        ("outliers", json!({"device": "213", "hours": [24]})),
        ("outliers", json!({"device": "213", "k": -1})),
        ("nearest", json!({"lat": 91, "long": 0})),
        ("nearest", json!({"lat": 39.6, "long": 22.4, "k": 0})),
        ("nearest", json!({"lat": 39.6, "long": 22.4, "radius": 3})),
        ("heatpoints", json!({"bbox": [1, 2, 3]})),
        ("region-weekly-stats", json!({})),
        ("dsp-analysis", json!({"ops": ["psd"]})),
        ("dsp-analysis", json!({"id": 1, "ops": ["fft"]})),
    ];
    for (name, args) in reject {
        assert!(!params_validator(name).is_valid(&args), "{name} should reject {args}");
    }
}

#[test]
fn schema_verdicts_agree_with_the_executor() {
    // whatever the schema rejects the executor rejects too, with a 4xx
    let (store, wingbeat) = loaded();
    let cases = [
        ("extremes", json!({"granularity": "month"})),
        ("outliers", json!({"device": "3", "hours": [24]})),
        ("outliers", json!({"device": "3", "k": -1})),
        ("nearest", json!({"lat": 91, "long": 0})),
        ("nearest", json!({"lat": 39.6, "long": 22.4, "k": 0})),
        ("nearest", json!({"lat": 39.6, "long": 22.4, "radius": 3})),
        ("heatpoints", json!({"bbox": [1, 2, 3]})),
        ("region-weekly-stats", json!({})),
        ("dsp-analysis", json!({"id": wingbeat, "ops": ["fft"]})),
        ("dsp-analysis", json!({"id": wingbeat, "overlap": 0.99})),
    ];
    for (name, args) in cases {
        assert!(!params_validator(name).is_valid(&args), "{name} {args}");
        let err = execute(&store, None, name, &Params::from_json(&args).unwrap()).unwrap_err();
        assert_eq!(err.status, 400, "{name} {args}: {err}");
    }
}

#[test]
fn explicit_defaults_match_omitted_parameters() {
    let (store, wingbeat) = loaded();
    for t in tools() {
        let base = example_args(t.name, wingbeat);
        let schema = t.parameters_schema();
        let mut with_defaults = base.clone();
        for (pname, p) in schema["properties"].as_object().unwrap() {
            if let Some(d) = p.get("default") {
                with_defaults[pname] = d.clone();
            }
        }
        // drop caller-chosen values that the defaults replaced, so both runs differ only in spelling
        let mut omitted = with_defaults.clone();
        for (pname, p) in schema["properties"].as_object().unwrap() {
            if p.get("default").is_some() {
                omitted.as_object_mut().unwrap().remove(pname);
            }
        }
        assert!(params_validator(t.name).is_valid(&with_defaults), "{}: {with_defaults}", t.name);
        let a = execute(&store, None, t.name, &Params::from_json(&with_defaults).unwrap());
        let b = execute(&store, None, t.name, &Params::from_json(&omitted).unwrap());
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(canonical(&a), canonical(&b), "{}", t.name),
            (Err(a), Err(b)) => assert_eq!(canonical(&a), canonical(&b), "{}", t.name),
            (a, b) => panic!("{}: {a:?} vs {b:?}", t.name),
        }
    }
}

#[test]
fn real_outputs_satisfy_result_schemas() {
    let (store, wingbeat) = loaded();
    for t in tools() {
        let args = example_args(t.name, wingbeat);
        assert!(params_validator(t.name).is_valid(&args), "{}: {args}", t.name);
        let out = execute(&store, None, t.name, &Params::from_json(&args).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", t.name));
        let v = jsonschema::validator_for(&t.result).unwrap();
        let errs: Vec<String> = v.iter_errors(&out).map(|e| format!("{e} at {}", e.instance_path)).collect();
        assert!(errs.is_empty(), "{}: {errs:#?}", t.name);
    }
}
