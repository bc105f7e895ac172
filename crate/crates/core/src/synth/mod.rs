//! Seeded synthetic fleets and test signals.
//!
//! All randomness comes from ChaCha8. Each device draws from its own stream
//! of the master seed, so output depends only on the config and the seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dsp::{encode_wav, DspError, Samples};
use crate::ingest::render_recording_filename;
use crate::model::{BoundingBox, DeviceId, GeoPoint, MediaFormat, RecordingKind, RecordingName, TrapReading};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("injection targets no generated row: device {device} at {timestamp}")]
    UnknownInjectionTarget { device: DeviceId, timestamp: NaiveDateTime },
    #[error(transparent)]
    Signal(#[from] DspError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemperatureCurve {
    pub mean: f64,
    /// Rise of the daily mean from the first to the last day.
    pub seasonal_ramp: f64,
    pub daily_amplitude: f64,
    pub warmest_hour: f64,
    /// Standard deviation of the fixed per-device offset.
    pub device_spread: f64,
    pub noise: f64,
}

impl Default for TemperatureCurve {
    fn default() -> Self {
        TemperatureCurve {
            mean: 24.0,
            seasonal_ramp: 6.0,
            daily_amplitude: 6.0,
            warmest_hour: 15.0,
            device_spread: 1.5,
            noise: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumidityModel {
    pub mean: f64,
    /// Intended Pearson correlation with temperature, in (-1, 0].
    pub target_r: f64,
    pub noise: f64,
}

impl Default for HumidityModel {
    fn default() -> Self {
        HumidityModel { mean: 60.0, target_r: -0.85, noise: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub device: DeviceId,
    pub timestamp: NaiveDateTime,
    pub magnitude: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    pub n_devices: usize,
    pub region: BoundingBox,
    pub start: NaiveDate,
    /// Exclusive.
    pub end: NaiveDate,
    pub peak_hour: u32,
    pub window_start: u32,
    pub window_end: u32,
    /// Mean captures per hour at the peak, before growth and device factor.
    pub base_rate: f64,
    /// Relative rate increase reached on the last day.
    pub seasonal_growth: f64,
    /// Per-device rate multipliers are drawn from [1 - spread, 1 + spread].
    pub device_rate_spread: f64,
    /// Fraction of the peak rate outside the active window.
    pub baseline: f64,
    pub temperature: TemperatureCurve,
    pub humidity: HumidityModel,
    pub injections: Vec<Injection>,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            n_devices: 250,
            region: BoundingBox { lat_min: 39.3, lat_max: 39.9, long_min: 22.0, long_max: 22.8 },
            start: NaiveDate::from_ymd_opt(2023, 6, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2023, 9, 1).expect("valid date"),
            peak_hour: 2,
            window_start: 21,
            window_end: 4,
            base_rate: 3.0,
            seasonal_growth: 1.0,
            device_rate_spread: 0.5,
            baseline: 0.05,
            temperature: TemperatureCurve::default(),
            humidity: HumidityModel::default(),
            injections: Vec::new(),
        }
    }
}

impl FleetConfig {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if self.end <= self.start {
            return bad("end must be after start");
        }
        if self.peak_hour > 23 || self.window_start > 23 || self.window_end > 23 {
            return bad("hours must be in 0-23");
        }
        if !(self.base_rate >= 0.0) || !(self.seasonal_growth >= 0.0) || !(0.0..=1.0).contains(&self.baseline) {
            return bad("rates must be non-negative and the baseline in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.device_rate_spread) {
            return bad("device_rate_spread must be in [0, 1)");
        }
        if !(self.humidity.target_r > -1.0 && self.humidity.target_r <= 0.0) {
            return bad("humidity target_r must be in (-1, 0]");
        }
        if !(self.humidity.noise > 0.0) || self.temperature.noise < 0.0 || self.temperature.device_spread < 0.0 {
            return bad("noise levels must be non-negative (humidity noise positive)");
        }
        if self.region.lat_min > self.region.lat_max || self.region.long_min > self.region.long_max {
            return bad("region is empty");
        }
        Ok(())
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days()
    }

    /// Relative activity for an hour of day: 1 at `peak_hour`, falling along
    /// a raised cosine to `baseline` one hour outside the active window.
    pub fn hour_profile(&self, hour: u32) -> f64 {
        let signed = |from: u32, to: u32| -> i32 {
            let d = (to as i32 - from as i32).rem_euclid(24);
            if d > 12 {
                d - 24
            } else {
                d
            }
        };
        let delta = signed(self.peak_hour, hour) as f64;
        let rise = (signed(self.window_start, self.peak_hour) as f64).abs() + 1.0;
        let fall = (signed(self.peak_hour, self.window_end) as f64).abs() + 1.0;
        let width = if delta < 0.0 { rise } else { fall };
        let shape = if delta.abs() < width { 0.5 * (1.0 + (PI * delta / width).cos()) } else { 0.0 };
        self.baseline + (1.0 - self.baseline) * shape
    }

    /// Standard deviation of the temperature model across the whole fleet.
    fn temperature_sd(&self) -> f64 {
        let t = &self.temperature;
        (t.daily_amplitude.powi(2) / 2.0 + t.seasonal_ramp.powi(2) / 12.0 + t.device_spread.powi(2) + t.noise.powi(2))
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTruth {
    pub device: DeviceId,
    pub position: GeoPoint,
    pub rate_factor: f64,
    pub temperature_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetTruth {
    pub seed: u64,
    pub devices: Vec<DeviceTruth>,
    pub injections: Vec<Injection>,
    /// Humidity slope against temperature used to reach the target r.
    pub humidity_slope: f64,
}

fn round_to(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (x * f).round() / f
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive finite rate").sample(rng) as u32
}

/// Hourly readings for every device over `[start, end)`, ordered by device
/// then time, with the ground truth behind them.
pub fn generate_fleet(config: &FleetConfig, seed: u64) -> Result<(Vec<TrapReading>, FleetTruth), SynthError> {
    config.validate()?;
    let days = config.days();
    let t = &config.temperature;
    let h = &config.humidity;
    let sd_t = config.temperature_sd();
    let r = h.target_r.abs();
    let slope = if sd_t > 0.0 { r * h.noise / (sd_t * (1.0 - r * r).sqrt()) } else { 0.0 };
    let temp_centre = t.mean + t.seasonal_ramp / 2.0;

    // device placement and fixed per-device parameters come from stream 0
    let mut setup = stream(seed, 0);
    let offset_dist = Normal::new(0.0, t.device_spread).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let mut taken = std::collections::BTreeSet::new();
    let mut devices = Vec::with_capacity(config.n_devices);
    for i in 0..config.n_devices {
        let position = loop {
            let lat = round_to(setup.random_range(config.region.lat_min..=config.region.lat_max), 6);
            let long = round_to(setup.random_range(config.region.long_min..=config.region.long_max), 6);
            if taken.insert((lat.to_bits(), long.to_bits())) {
                break GeoPoint { lat, long };
            }
        };
        let spread = config.device_rate_spread;
        devices.push(DeviceTruth {
            device: DeviceId::new((i + 1).to_string()),
            position,
            rate_factor: if spread > 0.0 { setup.random_range(1.0 - spread..=1.0 + spread) } else { 1.0 },
            temperature_offset: offset_dist.sample(&mut setup),
        });
    }

    let mut injected: BTreeMap<(&DeviceId, NaiveDateTime), u32> = BTreeMap::new();
    for inj in &config.injections {
        *injected.entry((&inj.device, inj.timestamp)).or_default() += inj.magnitude;
    }

    let temp_noise = Normal::new(0.0, t.noise).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let hum_noise = Normal::new(0.0, h.noise).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let mut readings = Vec::with_capacity(config.n_devices * days as usize * 24);
    let mut applied = 0usize;
    for (i, dev) in devices.iter().enumerate() {
        let mut rng = stream(seed, i as u64 + 1);
        for d in 0..days {
            let date = config.start + Duration::days(d);
            let season = d as f64 / days as f64;
            for hour in 0..24u32 {
                let timestamp = date.and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("valid hour"));
                let lambda = config.base_rate
                    * (1.0 + config.seasonal_growth * season)
                    * dev.rate_factor
                    * config.hour_profile(hour);
                let mut counts = poisson(&mut rng, lambda);
                if let Some(extra) = injected.get(&(&dev.device, timestamp)) {
                    counts += extra;
                    applied += 1;
                }
                let temperature = t.mean
                    + t.seasonal_ramp * season
                    + t.daily_amplitude * (2.0 * PI * (hour as f64 - t.warmest_hour) / 24.0).cos()
                    + dev.temperature_offset
                    + temp_noise.sample(&mut rng);
                let humidity = h.mean - slope * (temperature - temp_centre) + hum_noise.sample(&mut rng);
                readings.push(TrapReading {
                    timestamp,
                    counts,
                    temperature: round_to(temperature, 2),
                    humidity: round_to(humidity.clamp(0.0, 100.0), 1),
                    lat: dev.position.lat,
                    long: dev.position.long,
                    device: dev.device.clone(),
                });
            }
        }
    }
    if applied != injected.len() {
        let ((device, timestamp), _) = injected
            .iter()
            .find(|((dev, ts), _)| !readings.iter().any(|r| &r.device == *dev && r.timestamp == *ts))
            .expect("an unmatched injection exists");
        return Err(SynthError::UnknownInjectionTarget { device: (*device).clone(), timestamp: *timestamp });
    }

    Ok((readings, FleetTruth { seed, devices, injections: config.injections.clone(), humidity_slope: slope }))
}

/// A tone at `f0` with overtones: `amplitudes[0]` is the fundamental,
/// `amplitudes[n]` the (n+1)-th harmonic. Random phases, Gaussian noise,
/// clamped to [-1, 1].
pub fn generate_wingbeat(
    f0: f64,
    amplitudes: &[f64],
    duration_s: f64,
    sample_rate: u32,
    noise_sigma: f64,
    seed: u64,
) -> Result<Samples, SynthError> {
    if !(f0 > 0.0) || !(duration_s > 0.0) || !(noise_sigma >= 0.0) {
        return Err(SynthError::InvalidConfig("f0 and duration must be positive, noise non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = amplitudes.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let noise = Normal::new(0.0, noise_sigma).expect("non-negative sigma");
    let n = ((duration_s * sample_rate as f64).round() as usize).max(1);
    let fs = sample_rate as f64;
    let data = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let tone: f64 = amplitudes
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(k, (a, p))| a * (2.0 * PI * f0 * (k + 1) as f64 * t + p).sin())
                .sum();
            tone + noise.sample(&mut rng)
        })
        .collect();
    Ok(Samples::clamped(data, sample_rate)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Woodbore {
    pub samples: Samples,
    /// Onset of each click in seconds.
    pub click_times: Vec<f64>,
}

/// Regular clicks, `click_rate` per second with up to 10% timing jitter,
/// each a burst of exponentially damped noise `click_ms` long, over
/// Gaussian background noise.
pub fn generate_woodbore(
    click_rate: f64,
    click_ms: f64,
    amplitude: f64,
    duration_s: f64,
    noise_sigma: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<Woodbore, SynthError> {
    if !(click_rate >= 0.0) || !(click_ms > 0.0) || !(duration_s > 0.0) || !(noise_sigma >= 0.0) || !(amplitude >= 0.0)
    {
        return Err(SynthError::InvalidConfig("rates, durations, amplitude and noise must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let n = ((duration_s * fs).round() as usize).max(1);
    let noise = Normal::new(0.0, noise_sigma).expect("non-negative sigma");
    let mut data: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();

    let click_len = ((click_ms / 1000.0 * fs).round() as usize).max(1);
    let count = (click_rate * duration_s).floor() as usize;
    let mut click_times = Vec::with_capacity(count);
    let tau = click_len as f64 / 3.0;
    for i in 0..count {
        let jitter = rng.random_range(-0.1..=0.1);
        let onset = ((i as f64 + 0.5 + jitter) / click_rate).min(duration_s - click_len as f64 / fs).max(0.0);
        let start = (onset * fs).round() as usize;
        for j in 0..click_len.min(n.saturating_sub(start)) {
            data[start + j] += amplitude * rng.random_range(-1.0..=1.0) * (-(j as f64) / tau).exp();
        }
        click_times.push(start as f64 / fs);
    }
    Ok(Woodbore { samples: Samples::clamped(data, sample_rate)?, click_times })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub device: DeviceId,
    pub kind: RecordingKind,
    pub filename: String,
    pub wav: Vec<u8>,
}

/// A small set of WAV recordings named per the device filename grammars:
/// two wingbeats (a female-band and a male-band tone) and two vibration
/// recordings (one with a click train, one of background noise only).
pub fn generate_recordings(start: NaiveDateTime, seed: u64) -> Result<Vec<SyntheticRecording>, SynthError> {
    let mut out = Vec::new();
    for (i, (f0, temp, hum, opt)) in [(400.0, 24.5, 61.0, 3.25), (620.0, 22.5, 70.5, 12.5)].into_iter().enumerate() {
        let s = generate_wingbeat(f0, &[0.4, 0.15, 0.05], 1.0, 8000, 0.02, seed.wrapping_add(i as u64))?;
        let name = RecordingName {
            kind: RecordingKind::Wingbeat,
            format: MediaFormat::Wav,
            timestamp: start + Duration::minutes(7 * i as i64),
            serial: i as u32 + 1,
            temperature: Some(temp),
            humidity: Some(hum),
            optical_intensity: Some(opt),
            filename: String::new(),
        };
        out.push(recording("wb1", &name, &s)?);
    }
    for (i, rate) in [2.0, 0.0].into_iter().enumerate() {
        let w = generate_woodbore(rate, 5.0, 0.5, 10.0, 0.01, 8000, seed.wrapping_add(10 + i as u64))?;
        let name = RecordingName {
            kind: RecordingKind::Vibration,
            format: MediaFormat::Wav,
            timestamp: start + Duration::hours(i as i64),
            serial: 100 + i as u32,
            temperature: None,
            humidity: None,
            optical_intensity: None,
            filename: String::new(),
        };
        out.push(recording(&format!("tv{}", i + 1), &name, &w.samples)?);
    }
    Ok(out)
}

fn recording(device: &str, name: &RecordingName, s: &Samples) -> Result<SyntheticRecording, SynthError> {
    let filename = render_recording_filename(name).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    Ok(SyntheticRecording { device: device.into(), kind: name.kind, filename, wav: encode_wav(s) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_recording_filename;

    fn small(n: usize, days: i64) -> FleetConfig {
        let start = NaiveDate::from_ymd_opt(2023, 6, 1).unwrap();
        FleetConfig { n_devices: n, start, end: start + Duration::days(days), ..FleetConfig::default() }
    }

    #[test]
    fn profile_peaks_inside_the_window() {
        let c = FleetConfig::default();
        assert_eq!(c.hour_profile(2), 1.0);
        assert_eq!(c.hour_profile(12), c.baseline);
        assert!(c.hour_profile(1) > c.hour_profile(23));
        assert!(c.hour_profile(3) > c.hour_profile(4));
        let argmax = (0..24).max_by(|&a, &b| c.hour_profile(a).total_cmp(&c.hour_profile(b))).unwrap();
        assert_eq!(argmax, 2);
    }

    #[test]
    fn same_seed_same_rows() {
        let c = small(5, 3);
        let (a, ta) = generate_fleet(&c, 7).unwrap();
        let (b, tb) = generate_fleet(&c, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(a.len(), 5 * 3 * 24);
        let (other, _) = generate_fleet(&c, 8).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn zero_rate_leaves_only_injections() {
        let mut c = small(3, 2);
        c.base_rate = 0.0;
        let ts = NaiveDate::from_ymd_opt(2023, 6, 2).unwrap().and_hms_opt(3, 0, 0).unwrap();
        c.injections = vec![Injection { device: "2".into(), timestamp: ts, magnitude: 40 }];
        let (rows, truth) = generate_fleet(&c, 1).unwrap();
        let nonzero: Vec<&TrapReading> = rows.iter().filter(|r| r.counts > 0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!((nonzero[0].device.as_str(), nonzero[0].timestamp, nonzero[0].counts), ("2", ts, 40));
        assert_eq!(truth.injections.len(), 1);

        c.injections[0].device = "99".into();
        assert!(matches!(generate_fleet(&c, 1), Err(SynthError::UnknownInjectionTarget { .. })));
    }

    #[test]
    fn rows_are_valid_and_positions_distinct() {
        let c = small(40, 2);
        let (rows, truth) = generate_fleet(&c, 3).unwrap();
        for r in &rows {
            assert!((0.0..=100.0).contains(&r.humidity));
            assert!(c.region.contains(r.position()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for d in &truth.devices {
            assert!(seen.insert((d.position.lat.to_bits(), d.position.long.to_bits())));
        }
    }

    #[test]
    fn bad_configs() {
        let mut c = small(1, 1);
        c.end = c.start;
        assert!(generate_fleet(&c, 0).is_err());
        let mut c = small(1, 1);
        c.humidity.target_r = 0.5;
        assert!(generate_fleet(&c, 0).is_err());
    }

    #[test]
    fn config_json_uses_defaults() {
        let c: FleetConfig = serde_json::from_str(r#"{"n_devices": 3}"#).unwrap();
        assert_eq!(c.n_devices, 3);
        assert_eq!(c.peak_hour, 2);
    }

    #[test]
    fn woodbore_clicks() {
        let w = generate_woodbore(2.0, 5.0, 0.5, 10.0, 0.01, 8000, 1).unwrap();
        assert_eq!(w.click_times.len(), 20);
        assert!(w.click_times.windows(2).all(|p| p[0] < p[1]));
        let silent = generate_woodbore(2.0, 5.0, 0.0, 1.0, 0.0, 8000, 1).unwrap();
        assert!(silent.samples.data().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn wingbeat_is_deterministic() {
        let a = generate_wingbeat(600.0, &[0.4, 0.2, 0.1], 0.5, 8000, 0.01, 4).unwrap();
        assert_eq!(a, generate_wingbeat(600.0, &[0.4, 0.2, 0.1], 0.5, 8000, 0.01, 4).unwrap());
        assert_eq!(a.len(), 4000);
        assert!(generate_wingbeat(0.0, &[1.0], 1.0, 8000, 0.0, 0).is_err());
    }

    #[test]
    fn recording_names_parse_back() {
        let start = NaiveDate::from_ymd_opt(2023, 7, 1).unwrap().and_hms_opt(22, 0, 0).unwrap();
        let recs = generate_recordings(start, 5).unwrap();
        assert_eq!(recs.len(), 4);
        for r in recs {
            let parsed = parse_recording_filename(&r.filename, r.kind).unwrap();
            assert_eq!(parsed.filename, r.filename);
            assert!(r.wav.starts_with(b"RIFF"));
        }
    }
}
