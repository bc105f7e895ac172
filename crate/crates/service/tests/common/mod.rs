#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{Duration, NaiveDate, NaiveTime};
use http_body_util::BodyExt;
use tower::ServiceExt;

use trapnet_core::ingest::render_tabular;
use trapnet_core::model::TrapReading;
use trapnet_core::store::Store;
use trapnet_core::synth::{generate_fleet, FleetConfig, Injection};
use trapnet_service::{router, AppState};

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).expect("utf-8 body")
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).expect("json body")
    }
}

pub fn app() -> (Router, Arc<Store>) {
    let store = Arc::new(Store::in_memory());
    (router(AppState::new(store.clone())), store)
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.expect("infallible");
    let status = res.status();
    let content_type = res.headers().get("content-type").and_then(|v| v.to_str().ok()).map(str::to_string);
    let body = res.into_body().collect().await.expect("body").to_bytes().to_vec();
    Reply { status, content_type, body }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post(app: &Router, uri: &str, content_type: &str, body: impl Into<Body>) -> Reply {
    send(app, Request::post(uri).header("content-type", content_type).body(body.into()).unwrap()).await
}

pub async fn post_csv(app: &Router, rows: &[TrapReading]) -> Reply {
    let r = post(app, "/api/ingest/readings", "text/csv", render_tabular(rows)).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    r
}

pub fn multipart(device: &str, filename: &str, payload: &[u8]) -> (String, Vec<u8>) {
    let boundary = "trapnet-test-boundary";
    let mut body = Vec::new();
    body.extend_from_slice(
        format!("--{boundary}\r\nContent-Disposition: form-data; name=\"device\"\r\n\r\n{device}\r\n").as_bytes(),
    );
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{filename}\"\r\nContent-Type: application/octet-stream\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(payload);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

/// 12 devices, three weeks, two injected spikes; small enough for debug builds.
pub fn small_fleet(seed: u64) -> Vec<TrapReading> {
    let start = NaiveDate::from_ymd_opt(2023, 7, 3).unwrap();
    let at = |day: i64, hour: u32| (start + Duration::days(day)).and_time(NaiveTime::from_hms_opt(hour, 0, 0).unwrap());
    let cfg = FleetConfig {
        n_devices: 12,
        region: trapnet_core::model::BoundingBox::new(39.55, 39.7, 22.3, 22.5).unwrap(),
        start,
        end: start + Duration::days(21),
        injections: vec![
            Injection { device: "3".into(), timestamp: at(9, 22), magnitude: 60 },
            Injection { device: "7".into(), timestamp: at(15, 2), magnitude: 45 },
        ],
        ..Default::default()
    };
    generate_fleet(&cfg, seed).unwrap().0
}

pub fn canonical<T: serde::Serialize>(v: &T) -> String {
    trapnet_core::canonical_json(v).unwrap()
}
