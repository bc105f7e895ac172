//! Bucketed sums, rankings and hour-of-day summaries over trap readings.
//! Days are civil days of the device-local timestamps; weeks are ISO weeks
//! starting Monday.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use super::geo::device_positions;
use super::stats::{five_number_summary, FiveNumberSummary, MeanStd};
use super::AnalyticsError;
use crate::model::{BoundingBox, DeviceId, GeoPoint, HeatmapMatrix, Metric, TimeRange, TrapReading};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    Hour,
    Day,
    Week,
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hour" | "hourly" => Ok(Granularity::Hour),
            "day" | "daily" => Ok(Granularity::Day),
            "week" | "weekly" => Ok(Granularity::Week),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

impl Granularity {
    /// Start of the period containing `t`.
    pub fn floor(self, t: NaiveDateTime) -> NaiveDateTime {
        match self {
            Granularity::Hour => t.date().and_time(NaiveTime::from_hms_opt(t.hour(), 0, 0).expect("valid hour")),
            Granularity::Day => t.date().and_time(NaiveTime::MIN),
            Granularity::Week => week_start(t.date()).and_time(NaiveTime::MIN),
        }
    }

    pub fn step(self) -> Duration {
        match self {
            Granularity::Hour => Duration::hours(1),
            Granularity::Day => Duration::days(1),
            Granularity::Week => Duration::weeks(1),
        }
    }
}

pub fn week_start(d: NaiveDate) -> NaiveDate {
    d - Duration::days(d.weekday().num_days_from_monday() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodTotal {
    pub device: DeviceId,
    pub position: GeoPoint,
    pub period_start: NaiveDateTime,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeReport {
    pub granularity: Granularity,
    pub highest: PeriodTotal,
    pub lowest: PeriodTotal,
}

fn period_totals(readings: &[TrapReading], g: Granularity) -> BTreeMap<(DeviceId, NaiveDateTime), u64> {
    let mut totals = BTreeMap::new();
    for r in readings {
        let key = match g {
            // raw rows are compared as they are
            Granularity::Hour => r.timestamp,
            _ => g.floor(r.timestamp),
        };
        *totals.entry((r.device.clone(), key)).or_insert(0u64) += r.counts as u64;
    }
    totals
}

/// Highest and lowest device totals per hour, day or week. Ties go to the
/// earlier period, then the smaller device id.
pub fn extremes(readings: &[TrapReading], granularity: Granularity) -> Result<ExtremeReport, AnalyticsError> {
    if readings.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let positions: BTreeMap<DeviceId, GeoPoint> =
        device_positions(readings).into_iter().map(|p| (p.device, p.position)).collect();
    let totals = period_totals(readings, granularity);

    let order = |a: &(&(DeviceId, NaiveDateTime), &u64), b: &(&(DeviceId, NaiveDateTime), &u64)| {
        a.0 .1.cmp(&b.0 .1).then_with(|| a.0 .0.cmp(&b.0 .0))
    };
    let highest = totals.iter().min_by(|a, b| b.1.cmp(a.1).then_with(|| order(a, b))).expect("non-empty");
    let lowest = totals.iter().min_by(|a, b| a.1.cmp(b.1).then_with(|| order(a, b))).expect("non-empty");

    let entry = |((device, start), total): (&(DeviceId, NaiveDateTime), &u64)| PeriodTotal {
        device: device.clone(),
        position: positions[device],
        period_start: *start,
        total: *total,
    };
    Ok(ExtremeReport { granularity, highest: entry(highest), lowest: entry(lowest) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketCount {
    pub start: NaiveDateTime,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketedSeries {
    pub device: DeviceId,
    pub bucket: Granularity,
    pub points: Vec<BucketCount>,
}

/// Per-device sums in consecutive buckets covering `range` (or the span of
/// the data when absent). Buckets without rows report zero.
pub fn aggregate_counts(
    readings: &[TrapReading],
    bucket: Granularity,
    range: Option<TimeRange>,
) -> Vec<BucketedSeries> {
    let devices: BTreeSet<&DeviceId> = readings.iter().map(|r| &r.device).collect();
    let (start, end) = match range {
        Some(r) => (r.start, r.end),
        None => match (readings.iter().map(|r| r.timestamp).min(), readings.iter().map(|r| r.timestamp).max()) {
            (Some(lo), Some(hi)) => (lo, bucket.floor(hi) + bucket.step()),
            _ => return Vec::new(),
        },
    };
    let mut starts = Vec::new();
    let mut t = bucket.floor(start);
    while t < end {
        starts.push(t);
        t += bucket.step();
    }

    let mut sums: BTreeMap<(&DeviceId, NaiveDateTime), u64> = BTreeMap::new();
    for r in readings.iter().filter(|r| r.timestamp >= start && r.timestamp < end) {
        *sums.entry((&r.device, bucket.floor(r.timestamp))).or_default() += r.counts as u64;
    }
    devices
        .into_iter()
        .map(|d| BucketedSeries {
            device: d.clone(),
            bucket,
            points: starts
                .iter()
                .map(|&s| BucketCount { start: s, total: sums.get(&(d, s)).copied().unwrap_or(0) })
                .collect(),
        })
        .collect()
}

/// Trailing mean over up to `window` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyMean {
    pub device: DeviceId,
    pub mean_daily_total: f64,
    pub days: usize,
}

pub fn daily_totals(readings: &[TrapReading]) -> BTreeMap<DeviceId, BTreeMap<NaiveDate, u64>> {
    let mut out: BTreeMap<DeviceId, BTreeMap<NaiveDate, u64>> = BTreeMap::new();
    for r in readings {
        *out.entry(r.device.clone()).or_default().entry(r.date()).or_default() += r.counts as u64;
    }
    out
}

/// Devices ranked by mean daily total over days with at least one reading.
pub fn top_n_daily_mean(readings: &[TrapReading], n: usize) -> Vec<DailyMean> {
    let mut means: Vec<DailyMean> = daily_totals(readings)
        .into_iter()
        .map(|(device, days)| DailyMean {
            device,
            mean_daily_total: days.values().sum::<u64>() as f64 / days.len() as f64,
            days: days.len(),
        })
        .collect();
    means.sort_by(|a, b| b.mean_daily_total.total_cmp(&a.mean_daily_total).then_with(|| a.device.cmp(&b.device)));
    means.truncate(n);
    means
}

/// Hour x day grid: summed counts, or mean temperature / humidity. Columns
/// span every calendar day from the first to the last reading.
pub fn circadian_matrix(readings: &[TrapReading], metric: Metric) -> HeatmapMatrix {
    let rows: Vec<u32> = (0..24).collect();
    let (Some(first), Some(last)) = (readings.iter().map(|r| r.date()).min(), readings.iter().map(|r| r.date()).max())
    else {
        return HeatmapMatrix {
            metric,
            rows,
            cols: Vec::new(),
            cells: vec![Vec::new(); 24],
            scale_hint: fixed_scale(metric),
        };
    };
    let cols: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= last).collect();
    let n_days = cols.len();

    let mut sum = vec![vec![0.0f64; n_days]; 24];
    let mut n = vec![vec![0usize; n_days]; 24];
    for r in readings {
        let d = (r.date() - first).num_days() as usize;
        let h = r.hour() as usize;
        sum[h][d] += match metric {
            Metric::Counts => r.counts as f64,
            Metric::Temperature => r.temperature,
            Metric::Humidity => r.humidity,
        };
        n[h][d] += 1;
    }
    let cells: Vec<Vec<Option<f64>>> = (0..24)
        .map(|h| {
            (0..n_days)
                .map(|d| match (n[h][d], metric) {
                    (0, _) => None,
                    (_, Metric::Counts) => Some(sum[h][d]),
                    (k, _) => Some(sum[h][d] / k as f64),
                })
                .collect()
        })
        .collect();

    let scale_hint = fixed_scale(metric).or_else(|| {
        let vals = cells.iter().flatten().flatten();
        let lo = vals.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.copied().fold(f64::NEG_INFINITY, f64::max);
        lo.is_finite().then_some((lo, hi))
    });
    HeatmapMatrix { metric, rows, cols, cells, scale_hint }
}

fn fixed_scale(metric: Metric) -> Option<(f64, f64)> {
    match metric {
        Metric::Humidity => Some((0.0, 100.0)),
        Metric::Temperature => Some((0.0, 60.0)),
        Metric::Counts => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionWeeklyStats {
    pub qualifying_weeks: usize,
    pub temperature: MeanStd,
    pub humidity: MeanStd,
}

/// Temperature and humidity over the hourly rows of every (device, ISO week)
/// inside `bbox` whose weekly total exceeds `min_weekly`.
pub fn region_weekly_stats(
    readings: &[TrapReading],
    bbox: &BoundingBox,
    min_weekly: u64,
) -> Result<RegionWeeklyStats, AnalyticsError> {
    let mut cells: BTreeMap<(&DeviceId, NaiveDate), Vec<&TrapReading>> = BTreeMap::new();
    for r in readings.iter().filter(|r| bbox.contains(r.position())) {
        cells.entry((&r.device, week_start(r.date()))).or_default().push(r);
    }
    let qualifying: Vec<&Vec<&TrapReading>> =
        cells.values().filter(|rows| rows.iter().map(|r| r.counts as u64).sum::<u64>() > min_weekly).collect();
    if qualifying.is_empty() {
        return Err(AnalyticsError::NoQualifyingWeeks);
    }
    let temps: Vec<f64> = qualifying.iter().flat_map(|rows| rows.iter().map(|r| r.temperature)).collect();
    let hums: Vec<f64> = qualifying.iter().flat_map(|rows| rows.iter().map(|r| r.humidity)).collect();
    Ok(RegionWeeklyStats {
        qualifying_weeks: qualifying.len(),
        temperature: MeanStd::of(&temps).expect("non-empty"),
        humidity: MeanStd::of(&hums).expect("non-empty"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinVariable {
    Temperature,
    Humidity,
}

impl std::str::FromStr for BinVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "temperature" => Ok(BinVariable::Temperature),
            "humidity" => Ok(BinVariable::Humidity),
            other => Err(format!("unknown variable {other:?}")),
        }
    }
}

/// Mean counts per bin. `bin_edges` has one more entry than there are bins;
/// `None` stands for an unbounded edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedResponse {
    pub variable: BinVariable,
    pub bin_edges: Vec<Option<f64>>,
    pub bin_labels: Vec<String>,
    pub mean_counts: Vec<Option<f64>>,
    pub n: Vec<usize>,
}

pub fn binned_response(readings: &[TrapReading], variable: BinVariable) -> BinnedResponse {
    let (bin_edges, bin_labels): (Vec<Option<f64>>, Vec<String>) = match variable {
        BinVariable::Temperature => (
            vec![None, Some(10.0), Some(20.0), Some(30.0), None],
            vec!["<10".into(), "10-20".into(), "20-30".into(), ">=30".into()],
        ),
        BinVariable::Humidity => (
            (0..=10).map(|i| Some(i as f64 * 10.0)).collect(),
            (0..10).map(|i| format!("{}-{}", i * 10, i * 10 + 10)).collect(),
        ),
    };
    let bins = bin_labels.len();
    let mut sum = vec![0.0; bins];
    let mut n = vec![0usize; bins];
    for r in readings {
        let idx = match variable {
            BinVariable::Temperature => match r.temperature {
                t if t < 10.0 => 0,
                t if t < 20.0 => 1,
                t if t < 30.0 => 2,
                _ => 3,
            },
            // the top bin is closed at 100
            BinVariable::Humidity => ((r.humidity / 10.0).floor() as usize).min(9),
        };
        sum[idx] += r.counts as f64;
        n[idx] += 1;
    }
    let mean_counts = sum.iter().zip(&n).map(|(s, &k)| (k > 0).then(|| s / k as f64)).collect();
    BinnedResponse { variable, bin_edges, bin_labels, mean_counts, n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourStats {
    pub hour: u32,
    pub n: usize,
    pub mean_counts: Option<f64>,
    pub mean_temperature: Option<f64>,
    pub mean_humidity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyProfile {
    pub hours: Vec<HourStats>,
}

impl HourlyProfile {
    /// Hour with the highest mean counts; the earliest such hour on ties.
    pub fn peak_count_hour(&self) -> Option<u32> {
        self.hours
            .iter()
            .filter_map(|h| h.mean_counts.map(|m| (h.hour, m)))
            .fold(None, |best: Option<(u32, f64)>, (h, m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((h, m)),
            })
            .map(|(h, _)| h)
    }

    pub fn coolest_hour(&self) -> Option<u32> {
        self.hours
            .iter()
            .filter_map(|h| h.mean_temperature.map(|m| (h.hour, m)))
            .fold(None, |best: Option<(u32, f64)>, (h, m)| match best {
                Some((_, bm)) if bm <= m => best,
                _ => Some((h, m)),
            })
            .map(|(h, _)| h)
    }
}

pub fn hourly_profile(readings: &[TrapReading]) -> HourlyProfile {
    let mut acc = [(0usize, 0.0f64, 0.0f64, 0.0f64); 24];
    for r in readings {
        let a = &mut acc[r.hour() as usize];
        a.0 += 1;
        a.1 += r.counts as f64;
        a.2 += r.temperature;
        a.3 += r.humidity;
    }
    let hours = acc
        .iter()
        .enumerate()
        .map(|(h, &(n, c, t, hu))| {
            let avg = |s: f64| (n > 0).then(|| s / n as f64);
            HourStats { hour: h as u32, n, mean_counts: avg(c), mean_temperature: avg(t), mean_humidity: avg(hu) }
        })
        .collect();
    HourlyProfile { hours }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTemperature {
    pub device: DeviceId,
    pub summary: FiveNumberSummary,
}

/// Five-number temperature summary for each device.
pub fn temperature_distribution(readings: &[TrapReading]) -> Vec<DeviceTemperature> {
    let mut per: BTreeMap<&DeviceId, Vec<f64>> = BTreeMap::new();
    for r in readings {
        per.entry(&r.device).or_default().push(r.temperature);
    }
    per.into_iter()
        .map(|(d, temps)| DeviceTemperature {
            device: d.clone(),
            summary: five_number_summary(&temps).expect("each device has at least one reading"),
        })
        .collect()
}
