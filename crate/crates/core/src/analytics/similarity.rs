//! Pairwise comparison of device count series.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{NaiveDate, NaiveDateTime};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::aggregate::daily_totals;
use super::stats::{pearson, t_test};
use super::AnalyticsError;
use crate::model::{DeviceId, StatTestResult, TrapReading};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Cycles per day, 0 through Nyquist.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub device_a: DeviceId,
    pub device_b: DeviceId,
    pub common_days: Vec<NaiveDate>,
    /// `None` when either daily series is constant.
    pub pearson_r: Option<f64>,
    pub t_test: StatTestResult,
    pub spectrum_a: Spectrum,
    pub spectrum_b: Spectrum,
}

/// One-sided DFT magnitudes of the mean-removed series (unit sample spacing).
pub fn magnitude_spectrum(values: &[f64]) -> Spectrum {
    let n = values.len();
    if n == 0 {
        return Spectrum { frequencies: Vec::new(), magnitudes: Vec::new() };
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2 + 1;
    Spectrum {
        frequencies: (0..half).map(|k| k as f64 / n as f64).collect(),
        magnitudes: buf[..half].iter().map(|c| c.norm()).collect(),
    }
}

/// Daily totals of two devices over the days both reported, compared by
/// Pearson r, a two-sample t-test and their spectra.
pub fn similarity_report(
    readings: &[TrapReading],
    a: &DeviceId,
    b: &DeviceId,
) -> Result<SimilarityReport, AnalyticsError> {
    let days = daily_totals(readings);
    let empty = BTreeMap::new();
    let da = days.get(a).unwrap_or(&empty);
    let db = days.get(b).unwrap_or(&empty);
    let common_days: Vec<NaiveDate> = da.keys().filter(|d| db.contains_key(*d)).copied().collect();
    if common_days.is_empty() {
        return Err(AnalyticsError::NoCommonDays);
    }
    let xa: Vec<f64> = common_days.iter().map(|d| da[d] as f64).collect();
    let xb: Vec<f64> = common_days.iter().map(|d| db[d] as f64).collect();

    let pearson_r = match pearson(&xa, &xb) {
        Ok(r) => Some(r),
        Err(AnalyticsError::ZeroVariance) | Err(AnalyticsError::TooShort) => None,
        Err(e) => return Err(e),
    };
    Ok(SimilarityReport {
        device_a: a.clone(),
        device_b: b.clone(),
        t_test: t_test(&xa, &xb)?,
        pearson_r,
        spectrum_a: magnitude_spectrum(&xa),
        spectrum_b: magnitude_spectrum(&xb),
        common_days,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub devices: Vec<DeviceId>,
    /// Pearson r of hourly counts over shared timestamps; `None` where
    /// undefined (fewer than two shared points or a constant side).
    pub values: Vec<Vec<Option<f64>>>,
    pub overlap: Vec<Vec<usize>>,
}

/// Counts correlation between every pair of `devices`. An empty list means
/// every device present in `readings`.
pub fn correlation_matrix(readings: &[TrapReading], devices: &[DeviceId]) -> CorrelationMatrix {
    let mut series: BTreeMap<&DeviceId, BTreeMap<NaiveDateTime, f64>> = BTreeMap::new();
    for r in readings {
        *series.entry(&r.device).or_default().entry(r.timestamp).or_default() += r.counts as f64;
    }
    let devices: Vec<DeviceId> = if devices.is_empty() {
        series.keys().map(|d| (*d).clone()).collect()
    } else {
        devices.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    };
    let n = devices.len();
    let empty = BTreeMap::new();
    let mut values = vec![vec![None; n]; n];
    let mut overlap = vec![vec![0usize; n]; n];
    for i in 0..n {
        let si = series.get(&devices[i]).unwrap_or(&empty);
        overlap[i][i] = si.len();
        values[i][i] = Some(1.0);
        for j in i + 1..n {
            let sj = series.get(&devices[j]).unwrap_or(&empty);
            let (x, y): (Vec<f64>, Vec<f64>) = si.iter().filter_map(|(t, v)| sj.get(t).map(|w| (*v, *w))).unzip();
            let r = pearson(&x, &y).ok();
            values[i][j] = r;
            values[j][i] = r;
            overlap[i][j] = x.len();
            overlap[j][i] = x.len();
        }
    }
    CorrelationMatrix { devices, values, overlap }
}
