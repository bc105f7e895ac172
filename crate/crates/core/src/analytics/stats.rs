//! Descriptive statistics and the classical tests: one-way ANOVA, pooled
//! two-sample t-test and Pearson correlation. P-values come from the
//! regularized incomplete beta function evaluated by continued fraction.

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::model::{StatTestResult, TestKind};

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample (n - 1) standard deviation; `None` below two values.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: Option<f64>,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        Some(MeanStd { mean: mean(xs)?, std: sample_std(xs), n: xs.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile on sorted data (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn five_number_summary(values: &[f64]) -> Result<FiveNumberSummary, AnalyticsError> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    sorted.sort_by(f64::total_cmp);
    Ok(FiveNumberSummary {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, nine terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b).
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast for x < (a + 1) / (a + b + 2).
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

// Modified Lentz evaluation.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper tail P(F > f) of the F distribution.
pub fn f_survival(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    incomplete_beta(df2 / (df2 + df1 * f), df2 / 2.0, df1 / 2.0).clamp(0.0, 1.0)
}

/// Two-sided P(|T| > |t|) of Student's t distribution.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    incomplete_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// One-way ANOVA over `groups`.
pub fn anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<StatTestResult, AnalyticsError> {
    if groups.len() < 2 {
        return Err(AnalyticsError::TooFewGroups);
    }
    for (i, g) in groups.iter().enumerate() {
        if g.as_ref().len() < 2 {
            return Err(AnalyticsError::TooFewObservations { group: i });
        }
    }
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand = groups.iter().flat_map(|g| g.as_ref().iter()).sum::<f64>() / n as f64;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    let df1 = (k - 1) as u32;
    let df2 = (n - k) as u32;
    let ms_within = ss_within / df2 as f64;
    if ms_within == 0.0 {
        return Err(AnalyticsError::DegenerateGroups);
    }
    let f = (ss_between / df1 as f64) / ms_within;
    Ok(StatTestResult {
        kind: TestKind::AnovaF,
        statistic: f,
        df: vec![df1, df2],
        p_value: f_survival(f, df1 as f64, df2 as f64),
    })
}

/// Pooled-variance two-sided t-test. Two samples with no spread and equal
/// means report t = 0, p = 1.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<StatTestResult, AnalyticsError> {
    if a.is_empty() || b.is_empty() || a.len() + b.len() < 3 {
        return Err(AnalyticsError::TooShort);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let ssa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let ssb: f64 = b.iter().map(|x| (x - mb) * (x - mb)).sum();
    let df = a.len() + b.len() - 2;
    let pooled = (ssa + ssb) / df as f64;

    let (t, p) = if pooled == 0.0 {
        if ma != mb {
            return Err(AnalyticsError::ZeroVariance);
        }
        (0.0, 1.0)
    } else {
        let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
        (t, t_two_sided(t, df as f64))
    };
    Ok(StatTestResult { kind: TestKind::TwoSampleT, statistic: t, df: vec![df as u32], p_value: p })
}

/// Pearson r over pairwise-complete observations; a non-finite value on
/// either side drops the pair.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    let pairs: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(a, b)| (*a, *b)).collect();
    if pairs.len() < 2 {
        return Err(AnalyticsError::TooShort);
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson r with its t-based two-sided p-value (df = n - 2).
pub fn pearson_test(x: &[f64], y: &[f64]) -> Result<StatTestResult, AnalyticsError> {
    let r = pearson(x, y)?;
    let n = x.iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).count();
    let df = n.saturating_sub(2);
    let p = if df == 0 || r.abs() >= 1.0 {
        if r.abs() >= 1.0 && df > 0 {
            0.0
        } else {
            1.0
        }
    } else {
        let t = r * (df as f64 / (1.0 - r * r)).sqrt();
        t_two_sided(t, df as f64)
    };
    Ok(StatTestResult { kind: TestKind::PearsonR, statistic: r, df: vec![df as u32], p_value: p })
}
