//! Great-circle distances and location queries over trap positions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::anova;
use crate::model::{BoundingBox, DeviceId, GeoPoint, StatTestResult, TrapReading};

/// Mean Earth radius (IUGG), kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlong = (b.long - a.long).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlong / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePosition {
    pub device: DeviceId,
    pub position: GeoPoint,
}

/// Position of each device at its latest reading, ordered by device id.
pub fn device_positions(readings: &[TrapReading]) -> Vec<DevicePosition> {
    let mut latest: BTreeMap<&DeviceId, &TrapReading> = BTreeMap::new();
    for r in readings {
        let slot = latest.entry(&r.device).or_insert(r);
        if r.timestamp >= slot.timestamp {
            *slot = r;
        }
    }
    latest.into_iter().map(|(d, r)| DevicePosition { device: d.clone(), position: r.position() }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacentPair {
    pub device_a: DeviceId,
    pub device_b: DeviceId,
    pub distance_km: f64,
}

/// Unordered device pairs no farther apart than `threshold_km`; `device_a < device_b`.
pub fn adjacent_pairs(devices: &[DevicePosition], threshold_km: f64) -> Vec<AdjacentPair> {
    let mut sorted: Vec<&DevicePosition> = devices.iter().collect();
    sorted.sort_by(|a, b| a.device.cmp(&b.device));
    let mut out = Vec::new();
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            let d = haversine_km(a.position, b.position);
            if d <= threshold_km {
                out.push(AdjacentPair { device_a: a.device.clone(), device_b: b.device.clone(), distance_km: d });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyResult {
    pub threshold_km: f64,
    pub pairs: Vec<AdjacentPair>,
    /// Devices that appear in at least one pair, in group order.
    pub groups: Vec<DeviceId>,
    /// One-way ANOVA of hourly counts, one group per paired device.
    pub anova: Option<StatTestResult>,
    /// Why `anova` is absent when there are pairs.
    pub anova_error: Option<String>,
}

/// Adjacent pairs among the devices in `readings`, and whether their counts
/// differ.
pub fn adjacency(readings: &[TrapReading], threshold_km: f64) -> AdjacencyResult {
    let pairs = adjacent_pairs(&device_positions(readings), threshold_km);
    let mut groups: Vec<DeviceId> = pairs.iter().flat_map(|p| [p.device_a.clone(), p.device_b.clone()]).collect();
    groups.sort();
    groups.dedup();
    let (anova, anova_error) = if groups.is_empty() {
        (None, None)
    } else {
        let samples: Vec<Vec<f64>> = groups
            .iter()
            .map(|d| readings.iter().filter(|r| &r.device == d).map(|r| r.counts as f64).collect())
            .collect();
        match anova(&samples) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    AdjacencyResult { threshold_km, pairs, groups, anova, anova_error }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestTrap {
    pub device: DeviceId,
    pub position: GeoPoint,
    pub distance_km: f64,
}

/// The `k` devices closest to `point`, nearest first; equal distances by device id.
pub fn nearest_traps(point: GeoPoint, devices: &[DevicePosition], k: usize) -> Vec<NearestTrap> {
    let mut all: Vec<NearestTrap> = devices
        .iter()
        .map(|d| NearestTrap {
            device: d.device.clone(),
            position: d.position,
            distance_km: haversine_km(point, d.position),
        })
        .collect();
    all.sort_by(|a, b| a.distance_km.total_cmp(&b.distance_km).then_with(|| a.device.cmp(&b.device)));
    all.truncate(k);
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationGroup {
    pub position: GeoPoint,
    pub devices: Vec<DeviceId>,
}

/// Distinct (lat, long) pairs with the devices seen there, exact equality.
pub fn unique_locations(readings: &[TrapReading]) -> Vec<LocationGroup> {
    let mut groups: BTreeMap<(u64, u64), (GeoPoint, Vec<DeviceId>)> = BTreeMap::new();
    for r in readings {
        let p = r.position();
        let entry = groups.entry(point_key(p)).or_insert_with(|| (p, Vec::new()));
        if !entry.1.contains(&r.device) {
            entry.1.push(r.device.clone());
        }
    }
    let mut out: Vec<LocationGroup> = groups
        .into_values()
        .map(|(position, mut devices)| {
            devices.sort();
            LocationGroup { position, devices }
        })
        .collect();
    out.sort_by(|a, b| a.position.lat.total_cmp(&b.position.lat).then(a.position.long.total_cmp(&b.position.long)));
    out
}

// -0.0 and 0.0 compare equal as coordinates.
fn point_key(p: GeoPoint) -> (u64, u64) {
    let norm = |v: f64| if v == 0.0 { 0.0f64.to_bits() } else { v.to_bits() };
    (norm(p.lat), norm(p.long))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatPoint {
    pub position: GeoPoint,
    pub weight: u64,
}

/// One point per distinct location inside `bbox`, weighted by summed counts.
pub fn heat_points(readings: &[TrapReading], bbox: &BoundingBox) -> Vec<HeatPoint> {
    let mut acc: BTreeMap<(u64, u64), (GeoPoint, u64)> = BTreeMap::new();
    for r in readings.iter().filter(|r| bbox.contains(r.position())) {
        let p = r.position();
        acc.entry(point_key(p)).or_insert((p, 0)).1 += r.counts as u64;
    }
    let mut out: Vec<HeatPoint> = acc.into_values().map(|(position, weight)| HeatPoint { position, weight }).collect();
    out.sort_by(|a, b| a.position.lat.total_cmp(&b.position.lat).then(a.position.long.total_cmp(&b.position.long)));
    out
}
