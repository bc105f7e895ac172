//! WebAssembly entry points for the static demo page in `www/`. Each returns
//! canonical JSON or an error message.

use serde_json::json;
use wasm_bindgen::prelude::*;

use trapnet_core::analytics::{circadian_matrix, hourly_profile};
use trapnet_core::canonical_json;
use trapnet_core::dsp::{analyze, detect_impulses, infestation_verdict, AnalysisOp, AnalysisParams};
use trapnet_core::model::Metric;
use trapnet_core::synth::{generate_fleet, generate_wingbeat, generate_woodbore, FleetConfig};

const SAMPLE_RATE: u32 = 8000;
// envelope points sent to the page for drawing
const ENVELOPE_POINTS: usize = 800;

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, String> {
    canonical_json(v).map_err(|e| e.to_string())
}

/// 24 x days matrix of `metric` ("counts", "temperature", "humidity") for a
/// synthetic fleet, plus the hourly profile.
#[wasm_bindgen]
pub fn circadian_heatmap(seed: u32, n_devices: u32, days: u32, metric: &str) -> Result<String, String> {
    if !(1..=250).contains(&n_devices) || !(1..=120).contains(&days) {
        return Err("devices must be 1-250 and days 1-120".into());
    }
    let metric: Metric = metric.parse()?;
    let base = FleetConfig::default();
    let cfg =
        FleetConfig { n_devices: n_devices as usize, end: base.start + chrono::Duration::days(days as i64), ..base };
    let (rows, _) = generate_fleet(&cfg, seed as u64).map_err(|e| e.to_string())?;
    to_json(&json!({
        "rows": rows.len(),
        "matrix": circadian_matrix(&rows, metric),
        "profile": hourly_profile(&rows),
    }))
}

/// One second of synthetic wingbeat at `f0` Hz, analysed for PSD,
/// fundamental and sex.
#[wasm_bindgen]
pub fn wingbeat_analysis(f0: f64, noise: f64, seed: u32) -> Result<String, String> {
    let s =
        generate_wingbeat(f0, &[0.4, 0.15, 0.05], 1.0, SAMPLE_RATE, noise, seed as u64).map_err(|e| e.to_string())?;
    let ops = [AnalysisOp::Psd, AnalysisOp::Fundamental, AnalysisOp::Classify];
    let a = analyze(&s, &ops, &AnalysisParams::default()).map_err(|e| e.to_string())?;
    to_json(&a)
}

/// Ten seconds of bore vibration with `click_rate` clicks per second, with
/// the detected impulses, the verdict and a peak envelope for plotting.
#[wasm_bindgen]
pub fn woodbore_analysis(click_rate: f64, noise: f64, seed: u32) -> Result<String, String> {
    let w =
        generate_woodbore(click_rate, 5.0, 0.5, 10.0, noise, SAMPLE_RATE, seed as u64).map_err(|e| e.to_string())?;
    let params = AnalysisParams::default();
    let report = detect_impulses(&w.samples, params.impulses).map_err(|e| e.to_string())?;
    let verdict = infestation_verdict(&report, params.min_rate_per_min);
    let data = w.samples.data();
    let chunk = data.len().div_ceil(ENVELOPE_POINTS);
    let envelope: Vec<f64> = data.chunks(chunk).map(|c| c.iter().fold(0.0f64, |m, x| m.max(x.abs()))).collect();
    to_json(&json!({
        "duration_s": w.samples.duration_s(),
        "true_clicks": w.click_times,
        "impulses": report,
        "verdict": verdict,
        "envelope": envelope,
    }))
}
