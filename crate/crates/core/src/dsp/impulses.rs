//! Impulse-train detection for bore vibration recordings.

use serde::{Deserialize, Serialize};

use super::{DspError, Samples};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseParams {
    pub frame_ms: f64,
    pub k_mad: f64,
    pub min_gap_ms: f64,
}

impl Default for ImpulseParams {
    fn default() -> Self {
        ImpulseParams { frame_ms: 4.0, k_mad: 8.0, min_gap_ms: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseReport {
    pub impulse_times: Vec<f64>,
    pub impulse_rate_per_min: f64,
    /// Left unset by detection; filled in once a verdict is applied.
    pub infested: Option<bool>,
    pub threshold_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfestationVerdict {
    pub infested: bool,
    pub confidence: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Frames of `frame_ms` are scored by energy; frames above
/// median + k * MAD that are local maxima count as impulses, and impulses
/// closer than `min_gap_ms` collapse onto the strongest.
pub fn detect_impulses(s: &Samples, params: ImpulseParams) -> Result<ImpulseReport, DspError> {
    if !(params.frame_ms > 0.0) || !(params.k_mad >= 0.0) || !(params.min_gap_ms >= 0.0) {
        return Err(DspError::InvalidParameter("frame_ms must be positive, k_mad and min_gap_ms non-negative".into()));
    }
    let fs = s.sample_rate() as f64;
    let frame = ((params.frame_ms * fs / 1000.0).round() as usize).max(1);
    let n_frames = s.len() / frame;
    if n_frames < 3 {
        return Err(DspError::TooShort { needed: 3 * frame, got: s.len() });
    }
    let energy: Vec<f64> = s.data().chunks_exact(frame).map(|c| c.iter().map(|x| x * x).sum()).collect();
    let med = median(&energy);
    let deviations: Vec<f64> = energy.iter().map(|e| (e - med).abs()).collect();
    let threshold = med + params.k_mad * median(&deviations);

    let centre = |i: usize| (i * frame) as f64 / fs + frame as f64 / (2.0 * fs);
    let gap = params.min_gap_ms / 1000.0;
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for i in 0..n_frames {
        let e = energy[i];
        let local_max = (i == 0 || e > energy[i - 1]) && (i + 1 == n_frames || e >= energy[i + 1]);
        if e <= threshold || !local_max {
            continue;
        }
        let t = centre(i);
        match kept.last_mut() {
            Some(last) if t - last.0 < gap => {
                if e > last.1 {
                    *last = (t, e);
                }
            }
            _ => kept.push((t, e)),
        }
    }
    let impulse_times: Vec<f64> = kept.into_iter().map(|(t, _)| t).collect();
    let minutes = s.duration_s() / 60.0;
    Ok(ImpulseReport {
        impulse_rate_per_min: impulse_times.len() as f64 / minutes,
        impulse_times,
        infested: None,
        threshold_used: threshold,
    })
}

/// Infested when the impulse rate reaches `min_rate_per_min`; confidence
/// grows linearly and saturates at twice that rate.
pub fn infestation_verdict(report: &ImpulseReport, min_rate_per_min: f64) -> InfestationVerdict {
    let rate = report.impulse_rate_per_min;
    let confidence = if min_rate_per_min > 0.0 { (rate / (2.0 * min_rate_per_min)).min(1.0) } else { 1.0 };
    InfestationVerdict { infested: rate >= min_rate_per_min, confidence }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const FS: u32 = 8000;

    fn noisy(secs: f64, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, sigma).unwrap();
        (0..(secs * FS as f64) as usize).map(|_| d.sample(&mut rng)).collect()
    }

    // 5 ms bursts of uniform noise at the given onsets.
    fn add_clicks(x: &mut [f64], onsets: &[f64], amp: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = (0.005 * FS as f64) as usize;
        for &t in onsets {
            let start = (t * FS as f64) as usize;
            for v in x.iter_mut().skip(start).take(len) {
                *v += amp * rng.random_range(-1.0..1.0);
            }
        }
    }

    fn report(x: Vec<f64>) -> ImpulseReport {
        detect_impulses(&Samples::clamped(x, FS).unwrap(), ImpulseParams::default()).unwrap()
    }

    #[test]
    fn twenty_clicks() {
        let onsets: Vec<f64> = (0..20).map(|i| 0.25 + i as f64 * 0.5).collect();
        let mut x = noisy(10.0, 0.01, 1);
        add_clicks(&mut x, &onsets, 0.5, 2);
        let rep = report(x);
        assert!((18..=22).contains(&rep.impulse_times.len()), "{}", rep.impulse_times.len());
        assert!(rep.impulse_times.windows(2).all(|w| w[0] < w[1]));
        assert!((rep.impulse_rate_per_min - rep.impulse_times.len() as f64 * 6.0).abs() < 1e-9);
        let v = infestation_verdict(&rep, 10.0);
        assert!(v.infested);
        assert_eq!(v.confidence, 1.0);
    }

    #[test]
    fn noise_and_silence() {
        for seed in 0..5 {
            let rep = report(noisy(10.0, 0.01, seed));
            assert!(rep.impulse_times.len() <= 1);
            assert!(!infestation_verdict(&rep, 10.0).infested);
        }
        let rep = report(vec![0.0; 8000]);
        assert!(rep.impulse_times.is_empty());
        assert_eq!(infestation_verdict(&rep, 10.0), InfestationVerdict { infested: false, confidence: 0.0 });
    }

    #[test]
    fn polarity_does_not_matter() {
        let onsets: Vec<f64> = (0..7).map(|i| 0.1 + i as f64 * 0.37).collect();
        let mut x = noisy(3.0, 0.02, 9);
        add_clicks(&mut x, &onsets, 0.4, 10);
        let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(report(x).impulse_times, report(flipped).impulse_times);
    }

    #[test]
    fn leading_silence_shifts_times() {
        let mut x = noisy(2.0, 0.0, 0);
        add_clicks(&mut x, &[0.5, 1.2], 0.5, 4);
        let base = report(x.clone());
        let pad = 800;
        let mut padded = vec![0.0; pad];
        padded.extend(x);
        let shifted = report(padded);
        assert_eq!(base.impulse_times.len(), shifted.impulse_times.len());
        for (a, b) in base.impulse_times.iter().zip(&shifted.impulse_times) {
            assert!((b - a - pad as f64 / FS as f64).abs() <= 0.004 + 1e-12);
        }
    }

    #[test]
    fn close_impulses_merge() {
        let mut x = vec![0.0; 8000];
        x[1000] = 0.5;
        x[1080] = 0.9; // 10 ms later
        x[4000] = 0.5;
        let rep = report(x);
        assert_eq!(rep.impulse_times.len(), 2);
        assert!((rep.impulse_times[0] - (1080 / 32 * 32 + 16) as f64 / 8000.0).abs() < 1e-12);
    }

    #[test]
    fn verdict_boundaries() {
        let at = |rate: f64| ImpulseReport {
            impulse_times: vec![],
            impulse_rate_per_min: rate,
            infested: None,
            threshold_used: 0.0,
        };
        assert_eq!(infestation_verdict(&at(10.0), 10.0), InfestationVerdict { infested: true, confidence: 0.5 });
        assert_eq!(infestation_verdict(&at(120.0), 10.0), InfestationVerdict { infested: true, confidence: 1.0 });
        assert!(!infestation_verdict(&at(9.99), 10.0).infested);
    }

    #[test]
    fn short_input() {
        let s = Samples::new(vec![0.0; 40], FS).unwrap();
        assert!(matches!(detect_impulses(&s, ImpulseParams::default()), Err(DspError::TooShort { .. })));
    }
}
