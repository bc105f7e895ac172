//! Welch PSD, STFT magnitude and tonal peak extraction.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{DspError, Samples};

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment: usize,
    pub overlap: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        WelchParams { segment: 1024, overlap: 0.5 }
    }
}

/// One-sided power spectral density, power per Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

impl Psd {
    pub fn resolution_hz(&self) -> f64 {
        if self.frequencies.len() < 2 {
            0.0
        } else {
            self.frequencies[1] - self.frequencies[0]
        }
    }
}

fn power_spectra<'a>(
    x: &'a [f64],
    frame: usize,
    hop: usize,
    window: &'a [f64],
) -> impl Iterator<Item = Vec<Complex<f64>>> + 'a {
    let fft = FftPlanner::new().plan_fft_forward(frame);
    let count = (x.len() - frame) / hop + 1;
    (0..count).map(move |i| {
        let seg = &x[i * hop..i * hop + frame];
        let mut buf: Vec<Complex<f64>> = seg.iter().zip(window).map(|(s, w)| Complex::new(s * w, 0.0)).collect();
        fft.process(&mut buf);
        buf.truncate(frame / 2 + 1);
        buf
    })
}

/// Averaged Hann-windowed periodograms with density scaling: summing the
/// result times the bin width gives the window-weighted mean square of the
/// signal.
pub fn welch_psd(s: &Samples, params: WelchParams) -> Result<Psd, DspError> {
    let seg = params.segment;
    if seg < 2 {
        return Err(DspError::InvalidParameter("segment must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&params.overlap) {
        return Err(DspError::InvalidParameter("overlap must be in [0, 1)".into()));
    }
    if s.len() < seg {
        return Err(DspError::TooShort { needed: seg, got: s.len() });
    }
    let hop = (seg - (seg as f64 * params.overlap).floor() as usize).max(1);
    let window = hann(seg);
    let fs = s.sample_rate() as f64;
    let scale = 1.0 / (fs * window.iter().map(|w| w * w).sum::<f64>());

    let bins = seg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    for spec in power_spectra(s.data(), seg, hop, &window) {
        for (a, c) in acc.iter_mut().zip(&spec) {
            *a += c.norm_sqr();
        }
        count += 1;
    }
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (seg.is_multiple_of(2) && k == seg / 2) { 1.0 } else { 2.0 };
            a * scale * one_sided / count as f64
        })
        .collect();
    let frequencies = (0..bins).map(|k| k as f64 * fs / seg as f64).collect();
    Ok(Psd { frequencies, power })
}

/// Magnitude STFT. `magnitudes[t][f]`: one row per frame, `times` at frame
/// centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub times: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<Vec<f64>>,
}

pub fn spectrogram(s: &Samples, frame: usize, hop: usize) -> Result<Spectrogram, DspError> {
    if frame < 2 || hop == 0 {
        return Err(DspError::InvalidParameter("frame must be at least 2 and hop positive".into()));
    }
    if s.len() < frame {
        return Err(DspError::TooShort { needed: frame, got: s.len() });
    }
    let fs = s.sample_rate() as f64;
    let window = hann(frame);
    let magnitudes: Vec<Vec<f64>> =
        power_spectra(s.data(), frame, hop, &window).map(|spec| spec.iter().map(|c| c.norm()).collect()).collect();
    let times = (0..magnitudes.len()).map(|i| (i * hop) as f64 / fs + frame as f64 / (2.0 * fs)).collect();
    let frequencies = (0..frame / 2 + 1).map(|k| k as f64 * fs / frame as f64).collect();
    Ok(Spectrogram { times, frequencies, magnitudes })
}

// 6 dB in power.
const PEAK_RATIO: f64 = 3.981_071_705_534_973;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn is_local_max(p: &[f64], i: usize) -> bool {
    (i == 0 || p[i] > p[i - 1]) && (i + 1 == p.len() || p[i] >= p[i + 1])
}

fn refine(psd: &Psd, i: usize) -> f64 {
    let p = &psd.power;
    let df = psd.resolution_hz();
    if i == 0 || i + 1 >= p.len() {
        return psd.frequencies[i];
    }
    let (a, b, c) = (p[i - 1], p[i], p[i + 1]);
    let denom = a - 2.0 * b + c;
    let delta = if denom == 0.0 { 0.0 } else { 0.5 * (a - c) / denom };
    psd.frequencies[i] + delta.clamp(-0.5, 0.5) * df
}

fn peak_in(psd: &Psd, lo: f64, hi: f64) -> Option<usize> {
    let idx: Vec<usize> =
        (0..psd.frequencies.len()).filter(|&k| psd.frequencies[k] >= lo && psd.frequencies[k] <= hi).collect();
    idx.into_iter().max_by(|&a, &b| psd.power[a].total_cmp(&psd.power[b]).then(b.cmp(&a)))
}

/// Strongest in-band tone, interpolated between bins. `None` when the peak
/// sits on a slope (the tone lies outside the band) or rises less than
/// 6 dB above the in-band median.
pub fn fundamental_frequency(psd: &Psd, band: (f64, f64)) -> Option<f64> {
    let in_band: Vec<f64> = psd
        .frequencies
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f >= band.0 && **f <= band.1)
        .map(|(_, p)| *p)
        .collect();
    if in_band.len() < 3 {
        return None;
    }
    let i = peak_in(psd, band.0, band.1)?;
    let peak = psd.power[i];
    if peak <= 0.0 || !is_local_max(&psd.power, i) || peak < PEAK_RATIO * median(in_band) {
        return None;
    }
    Some(refine(psd, i))
}

/// Peaks near integer multiples (2, 3, ...) of `f0`, each within 5% of its
/// multiple and 6 dB above the median of the whole spectrum.
pub fn harmonics(psd: &Psd, f0: f64, max_order: u32) -> Vec<f64> {
    let nyquist = psd.frequencies.last().copied().unwrap_or(0.0);
    let floor = median(psd.power.clone());
    let mut out = Vec::new();
    for n in 2..=max_order {
        let target = n as f64 * f0;
        if target * 0.95 > nyquist {
            break;
        }
        let Some(i) = peak_in(psd, target * 0.95, target * 1.05) else { continue };
        let p = psd.power[i];
        if p <= 0.0 || !is_local_max(&psd.power, i) || p < PEAK_RATIO * floor {
            continue;
        }
        let f = refine(psd, i);
        if (f - target).abs() <= 0.05 * target {
            out.push(f);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MosquitoSex {
    Female,
    Male,
    Unknown,
}

/// Female below 500 Hz (from 250), male from 500 through 800 Hz.
pub fn classify_mosquito_sex(f0: f64) -> MosquitoSex {
    if (250.0..500.0).contains(&f0) {
        MosquitoSex::Female
    } else if (500.0..=800.0).contains(&f0) {
        MosquitoSex::Male
    } else {
        MosquitoSex::Unknown
    }
}
