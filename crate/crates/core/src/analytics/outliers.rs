//! Per-hour z-score outliers for one device.

use std::collections::BTreeSet;

use super::stats::{mean, sample_std};
use super::AnalyticsError;
use crate::model::{DeviceId, OutlierEvent, TrapReading};

/// The default night window, 21:00 through 04:00.
pub fn night_hours() -> BTreeSet<u32> {
    [21, 22, 23, 0, 1, 2, 3, 4].into_iter().collect()
}

/// Readings of `device` in `hours` whose counts exceed the hour's mean by
/// more than `k` sample standard deviations. Each hour of day is scored
/// against that device's own history for the same hour.
pub fn hourly_outliers(
    readings: &[TrapReading],
    device: &DeviceId,
    hours: &BTreeSet<u32>,
    k: f64,
) -> Result<Vec<OutlierEvent>, AnalyticsError> {
    if !k.is_finite() || k < 0.0 {
        return Err(AnalyticsError::InvalidParameter(format!("k must be a finite non-negative number, got {k}")));
    }
    if let Some(h) = hours.iter().find(|h| **h > 23) {
        return Err(AnalyticsError::InvalidParameter(format!("hour {h} is outside 0-23")));
    }
    let own: Vec<&TrapReading> = readings.iter().filter(|r| &r.device == device).collect();
    let mut events = Vec::new();
    for &hour in hours {
        let rows: Vec<&TrapReading> = own.iter().copied().filter(|r| r.hour() == hour).collect();
        if rows.len() < 3 {
            return Err(AnalyticsError::InsufficientData { hour });
        }
        let counts: Vec<f64> = rows.iter().map(|r| r.counts as f64).collect();
        let m = mean(&counts).expect("non-empty");
        let s = sample_std(&counts).expect("at least three values");
        if s == 0.0 {
            continue;
        }
        for r in rows {
            let c = r.counts as f64;
            if c > m + k * s {
                events.push(OutlierEvent {
                    device: device.clone(),
                    timestamp: r.timestamp,
                    counts: r.counts,
                    hour,
                    z_score: (c - m) / s,
                    hour_mean: m,
                    hour_std: s,
                });
            }
        }
    }
    events.sort_by_key(|a| a.timestamp);
    Ok(events)
}
