//! Every aggregation checked against a deliberately naive re-implementation
//! on random datasets. Each check panics on the first mismatch.

#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trapnet_core::analytics::aggregate::{BucketCount, Granularity};
use trapnet_core::analytics::*;
use trapnet_core::model::{BoundingBox, DeviceId, GeoPoint, Metric, TrapReading};

pub const DATASETS: u64 = 200;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => close(x, y),
        (None, None) => true,
        _ => false,
    }
}

fn dataset(seed: u64) -> Vec<TrapReading> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_rows = rng.random_range(1..=500);
    let n_dev = rng.random_range(1..=6);
    let sites: Vec<(f64, f64)> =
        (0..n_dev).map(|_| (rng.random_range(39.0..40.0), rng.random_range(22.0..23.0))).collect();
    let base = NaiveDate::from_ymd_opt(2023, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let span_h = rng.random_range(24..24 * 40);
    (0..n_rows)
        .map(|_| {
            let d = rng.random_range(0..n_dev);
            // occasionally a device reports from a second spot
            let (lat, long) = if rng.random_bool(0.05) { sites[(d + 1) % n_dev] } else { sites[d] };
            TrapReading {
                timestamp: base + Duration::hours(rng.random_range(0..span_h)),
                counts: if rng.random_bool(0.1) { rng.random_range(0..400) } else { rng.random_range(0..30) },
                temperature: (rng.random_range(-5.0f64..45.0) * 100.0).round() / 100.0,
                humidity: (rng.random_range(0.0f64..=100.0) * 10.0).round() / 10.0,
                lat,
                long,
                device: DeviceId::new(format!("d{d}")),
            }
        })
        .collect()
}

fn for_each_dataset(mut f: impl FnMut(u64, &[TrapReading])) {
    for seed in 0..DATASETS {
        f(seed, &dataset(seed));
    }
}

fn naive_floor(t: NaiveDateTime, g: Granularity) -> NaiveDateTime {
    let midnight = t.date().and_hms_opt(0, 0, 0).unwrap();
    match g {
        Granularity::Hour => midnight + Duration::hours(t.hour() as i64),
        Granularity::Day => midnight,
        Granularity::Week => midnight - Duration::days(t.weekday().number_from_monday() as i64 - 1),
    }
}

fn devices(rows: &[TrapReading]) -> Vec<DeviceId> {
    let mut v: Vec<DeviceId> = Vec::new();
    for r in rows {
        if !v.contains(&r.device) {
            v.push(r.device.clone());
        }
    }
    v.sort();
    v
}

fn latest_position(rows: &[TrapReading], d: &DeviceId) -> GeoPoint {
    let mut best: Option<&TrapReading> = None;
    for r in rows.iter().filter(|r| &r.device == d) {
        if best.is_none_or(|b| r.timestamp >= b.timestamp) {
            best = Some(r);
        }
    }
    best.unwrap().position()
}

fn naive_mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn naive_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = naive_mean(xs);
    let mut s = 0.0;
    for x in xs {
        s += (x - m).powi(2);
    }
    Some((s / (xs.len() as f64 - 1.0)).sqrt())
}

pub fn extremes_match() {
    for_each_dataset(|seed, rows| {
        for g in [Granularity::Hour, Granularity::Day, Granularity::Week] {
            let mut totals: Vec<(DeviceId, NaiveDateTime, u64)> = Vec::new();
            for r in rows {
                let key = if g == Granularity::Hour { r.timestamp } else { naive_floor(r.timestamp, g) };
                match totals.iter_mut().find(|(d, k, _)| *d == r.device && *k == key) {
                    Some(e) => e.2 += r.counts as u64,
                    None => totals.push((r.device.clone(), key, r.counts as u64)),
                }
            }
            let mut hi = &totals[0];
            let mut lo = &totals[0];
            for t in &totals {
                if t.2 > hi.2 || (t.2 == hi.2 && (t.1 < hi.1 || (t.1 == hi.1 && t.0 < hi.0))) {
                    hi = t;
                }
                if t.2 < lo.2 || (t.2 == lo.2 && (t.1 < lo.1 || (t.1 == lo.1 && t.0 < lo.0))) {
                    lo = t;
                }
            }
            let rep = extremes(rows, g).unwrap();
            assert_eq!(
                (&rep.highest.device, rep.highest.period_start, rep.highest.total),
                (&hi.0, hi.1, hi.2),
                "seed {seed}"
            );
            assert_eq!(
                (&rep.lowest.device, rep.lowest.period_start, rep.lowest.total),
                (&lo.0, lo.1, lo.2),
                "seed {seed}"
            );
            assert_eq!(rep.highest.position, latest_position(rows, &hi.0));
        }
    });
}

pub fn bucket_sums_match() {
    for_each_dataset(|seed, rows| {
        for g in [Granularity::Hour, Granularity::Day, Granularity::Week] {
            let min = rows.iter().map(|r| r.timestamp).min().unwrap();
            let max = rows.iter().map(|r| r.timestamp).max().unwrap();
            let step = match g {
                Granularity::Hour => Duration::hours(1),
                Granularity::Day => Duration::days(1),
                Granularity::Week => Duration::days(7),
            };
            let got = aggregate_counts(rows, g, None);
            let devs = devices(rows);
            assert_eq!(got.len(), devs.len());
            for (series, d) in got.iter().zip(&devs) {
                assert_eq!(&series.device, d);
                let mut expected = Vec::new();
                let mut b = naive_floor(min, g);
                while b <= naive_floor(max, g) {
                    let total = rows
                        .iter()
                        .filter(|r| &r.device == d && naive_floor(r.timestamp, g) == b)
                        .map(|r| r.counts as u64)
                        .sum();
                    expected.push(BucketCount { start: b, total });
                    b += step;
                }
                assert_eq!(series.points, expected, "seed {seed} {g:?}");
            }
        }
    });
}

pub fn daily_means_match() {
    for_each_dataset(|seed, rows| {
        let mut expected: Vec<(DeviceId, f64)> = devices(rows)
            .into_iter()
            .map(|d| {
                let own: Vec<&TrapReading> = rows.iter().filter(|r| r.device == d).collect();
                let mut days: Vec<NaiveDate> = own.iter().map(|r| r.date()).collect();
                days.sort();
                days.dedup();
                let total: u64 = own.iter().map(|r| r.counts as u64).sum();
                (d, total as f64 / days.len() as f64)
            })
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let n = (seed % 5) as usize + 1;
        let got = top_n_daily_mean(rows, n);
        assert_eq!(got.len(), n.min(expected.len()));
        for (g, e) in got.iter().zip(&expected) {
            assert_eq!(g.device, e.0, "seed {seed}");
            assert!(close(g.mean_daily_total, e.1));
        }
    });
}

pub fn circadian_cells_match() {
    for_each_dataset(|seed, rows| {
        for metric in [Metric::Counts, Metric::Temperature, Metric::Humidity] {
            let m = circadian_matrix(rows, metric);
            let first = rows.iter().map(|r| r.date()).min().unwrap();
            let last = rows.iter().map(|r| r.date()).max().unwrap();
            assert_eq!(m.cols.len() as i64, (last - first).num_days() + 1);
            for h in 0..24u32 {
                for (j, day) in m.cols.iter().enumerate() {
                    let cell: Vec<&TrapReading> = rows.iter().filter(|r| r.hour() == h && r.date() == *day).collect();
                    let expected = if cell.is_empty() {
                        None
                    } else {
                        Some(match metric {
                            Metric::Counts => cell.iter().map(|r| r.counts as f64).sum(),
                            Metric::Temperature => naive_mean(&cell.iter().map(|r| r.temperature).collect::<Vec<_>>()),
                            Metric::Humidity => naive_mean(&cell.iter().map(|r| r.humidity).collect::<Vec<_>>()),
                        })
                    };
                    assert!(close_opt(m.cells[h as usize][j], expected), "seed {seed} h{h} {day}");
                }
            }
            if metric == Metric::Counts {
                let cell_total: f64 = m.cells.iter().flatten().flatten().sum();
                assert_eq!(cell_total, rows.iter().map(|r| r.counts as f64).sum::<f64>());
            }
        }
    });
}

pub fn region_weekly_stats_match() {
    for_each_dataset(|seed, rows| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 10_000);
        let (a, b) = (rng.random_range(39.0f64..40.0), rng.random_range(39.0f64..40.0));
        let (c, d) = (rng.random_range(22.0f64..23.0), rng.random_range(22.0f64..23.0));
        let bbox = BoundingBox::new(a.min(b), a.max(b), c.min(d), c.max(d)).unwrap();
        let threshold = rng.random_range(0..200);

        let inside: Vec<&TrapReading> = rows.iter().filter(|r| bbox.contains(r.position())).collect();
        let mut groups: Vec<(DeviceId, NaiveDateTime, Vec<&TrapReading>)> = Vec::new();
        for r in inside {
            let w = naive_floor(r.timestamp, Granularity::Week);
            match groups.iter_mut().find(|g| g.0 == r.device && g.1 == w) {
                Some(g) => g.2.push(r),
                None => groups.push((r.device.clone(), w, vec![r])),
            }
        }
        let qualifying: Vec<&(DeviceId, NaiveDateTime, Vec<&TrapReading>)> =
            groups.iter().filter(|g| g.2.iter().map(|r| r.counts as u64).sum::<u64>() > threshold).collect();
        let got = region_weekly_stats(rows, &bbox, threshold);
        if qualifying.is_empty() {
            assert_eq!(got, Err(AnalyticsError::NoQualifyingWeeks), "seed {seed}");
            return;
        }
        let got = got.unwrap();
        let temps: Vec<f64> = qualifying.iter().flat_map(|g| g.2.iter().map(|r| r.temperature)).collect();
        let hums: Vec<f64> = qualifying.iter().flat_map(|g| g.2.iter().map(|r| r.humidity)).collect();
        assert_eq!(got.qualifying_weeks, qualifying.len());
        assert!(close(got.temperature.mean, naive_mean(&temps)));
        assert!(close_opt(got.temperature.std, naive_std(&temps)));
        assert!(close(got.humidity.mean, naive_mean(&hums)));
        assert!(close_opt(got.humidity.std, naive_std(&hums)));
    });
}

pub fn bins_match() {
    for_each_dataset(|seed, rows| {
        let t = binned_response(rows, BinVariable::Temperature);
        let h = binned_response(rows, BinVariable::Humidity);
        for i in 0..4 {
            let members: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    let v = r.temperature;
                    match i {
                        0 => v < 10.0,
                        1 => (10.0..20.0).contains(&v),
                        2 => (20.0..30.0).contains(&v),
                        _ => v >= 30.0,
                    }
                })
                .map(|r| r.counts as f64)
                .collect();
            assert_eq!(t.n[i], members.len(), "seed {seed}");
            assert!(close_opt(t.mean_counts[i], (!members.is_empty()).then(|| naive_mean(&members))));
        }
        for i in 0..10 {
            let lo = i as f64 * 10.0;
            let members: Vec<f64> = rows
                .iter()
                .filter(|r| r.humidity >= lo && (r.humidity < lo + 10.0 || (i == 9 && r.humidity <= 100.0)))
                .map(|r| r.counts as f64)
                .collect();
            assert_eq!(h.n[i], members.len(), "seed {seed}");
            assert!(close_opt(h.mean_counts[i], (!members.is_empty()).then(|| naive_mean(&members))));
        }
    });
}

pub fn hourly_profile_matches() {
    for_each_dataset(|seed, rows| {
        let p = hourly_profile(rows);
        for h in 0..24u32 {
            let cell: Vec<&TrapReading> = rows.iter().filter(|r| r.hour() == h).collect();
            let s = &p.hours[h as usize];
            assert_eq!(s.n, cell.len(), "seed {seed}");
            if cell.is_empty() {
                assert!(s.mean_counts.is_none() && s.mean_temperature.is_none());
            } else {
                assert!(close(
                    s.mean_counts.unwrap(),
                    naive_mean(&cell.iter().map(|r| r.counts as f64).collect::<Vec<_>>())
                ));
                assert!(close(
                    s.mean_humidity.unwrap(),
                    naive_mean(&cell.iter().map(|r| r.humidity).collect::<Vec<_>>())
                ));
            }
        }
    });
}

fn naive_percentile(sorted: &[f64], p: f64) -> f64 {
    // numpy "linear": rank = p (n - 1), interpolate between neighbours
    let rank = p * (sorted.len() as f64 - 1.0);
    let below = rank as usize;
    if below + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[below] * (1.0 - (rank - below as f64)) + sorted[below + 1] * (rank - below as f64)
}

pub fn temperature_summaries_match() {
    for_each_dataset(|seed, rows| {
        let got = temperature_distribution(rows);
        let devs = devices(rows);
        assert_eq!(got.len(), devs.len());
        for (g, d) in got.iter().zip(&devs) {
            let mut t: Vec<f64> = rows.iter().filter(|r| &r.device == d).map(|r| r.temperature).collect();
            t.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let s = g.summary;
            assert_eq!((s.min, s.max), (t[0], t[t.len() - 1]), "seed {seed}");
            assert!(close(s.q1, naive_percentile(&t, 0.25)));
            assert!(close(s.median, naive_percentile(&t, 0.5)));
            assert!(close(s.q3, naive_percentile(&t, 0.75)));
        }
    });
}

fn naive_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    // spherical law of haversines through atan2
    let r = 6371.0088;
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let x =
        ((p2 - p1) / 2.0).sin().powi(2) + p1.cos() * p2.cos() * ((b.long - a.long).to_radians() / 2.0).sin().powi(2);
    2.0 * r * x.sqrt().atan2((1.0 - x).sqrt())
}

pub fn geo_queries_match() {
    for_each_dataset(|seed, rows| {
        let devs = devices(rows);
        let positions: Vec<(DeviceId, GeoPoint)> = devs.iter().map(|d| (d.clone(), latest_position(rows, d))).collect();
        let dp = device_positions(rows);
        assert_eq!(dp.len(), positions.len());
        for (a, b) in dp.iter().zip(&positions) {
            assert_eq!((&a.device, a.position), (&b.0, b.1));
        }

        let query = GeoPoint { lat: 39.5, long: 22.5 };
        let mut ranked: Vec<(f64, DeviceId)> =
            positions.iter().map(|(d, p)| (naive_distance(query, *p), d.clone())).collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let got = nearest_traps(query, &dp, 3);
        assert_eq!(got.len(), ranked.len().min(3));
        for (g, e) in got.iter().zip(&ranked) {
            assert_eq!(g.device, e.1, "seed {seed}");
            assert!(close(g.distance_km, e.0));
        }

        let threshold = 40.0;
        let mut pairs = Vec::new();
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if naive_distance(positions[i].1, positions[j].1) <= threshold {
                    pairs.push((positions[i].0.clone(), positions[j].0.clone()));
                }
            }
        }
        let got: Vec<(DeviceId, DeviceId)> =
            adjacent_pairs(&dp, threshold).into_iter().map(|p| (p.device_a, p.device_b)).collect();
        assert_eq!(got, pairs, "seed {seed}");

        let mut spots: Vec<(f64, f64, u64, BTreeSet<DeviceId>)> = Vec::new();
        for r in rows {
            match spots.iter_mut().find(|s| s.0 == r.lat && s.1 == r.long) {
                Some(s) => {
                    s.2 += r.counts as u64;
                    s.3.insert(r.device.clone());
                }
                None => spots.push((r.lat, r.long, r.counts as u64, [r.device.clone()].into())),
            }
        }
        spots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
        let locs = unique_locations(rows);
        assert_eq!(locs.len(), spots.len());
        for (l, s) in locs.iter().zip(&spots) {
            assert_eq!((l.position.lat, l.position.long), (s.0, s.1));
            assert_eq!(l.devices, s.3.iter().cloned().collect::<Vec<_>>());
        }
        let all = BoundingBox::new(-90.0, 90.0, -180.0, 180.0).unwrap();
        let heat = heat_points(rows, &all);
        assert_eq!(heat.iter().map(|h| h.weight).collect::<Vec<_>>(), spots.iter().map(|s| s.2).collect::<Vec<_>>());
    });
}

pub fn outliers_match() {
    for_each_dataset(|seed, rows| {
        let device = &rows[0].device;
        let k = 1.0 + (seed % 3) as f64 * 0.5;
        let own: Vec<&TrapReading> = rows.iter().filter(|r| &r.device == device).collect();
        let hours: BTreeSet<u32> = (0..24).filter(|h| own.iter().filter(|r| r.hour() == *h).count() >= 3).collect();
        let got = hourly_outliers(rows, device, &hours, k).unwrap();

        let mut expected = Vec::new();
        for &h in &hours {
            let vals: Vec<f64> = own.iter().filter(|r| r.hour() == h).map(|r| r.counts as f64).collect();
            let m = naive_mean(&vals);
            let s = naive_std(&vals).unwrap();
            for r in own.iter().filter(|r| r.hour() == h) {
                if s > 0.0 && r.counts as f64 > m + k * s {
                    expected.push((r.timestamp, (r.counts as f64 - m) / s));
                }
            }
        }
        expected.sort_by_key(|a| a.0);
        assert_eq!(got.len(), expected.len(), "seed {seed}");
        for (g, e) in got.iter().zip(&expected) {
            assert_eq!(g.timestamp, e.0);
            assert!(close(g.z_score, e.1));
        }

        let sparse = (0..24).find(|h| own.iter().filter(|r| r.hour() == *h).count() < 3);
        if let Some(h) = sparse {
            assert_eq!(
                hourly_outliers(rows, device, &[h].into(), k),
                Err(AnalyticsError::InsufficientData { hour: h })
            );
        }
    });
}

fn naive_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (naive_mean(x), naive_mean(y));
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

pub fn correlations_match() {
    for_each_dataset(|seed, rows| {
        let devs = devices(rows);
        let m = correlation_matrix(rows, &[]);
        assert_eq!(m.devices, devs);
        let series = |d: &DeviceId| {
            let mut s: Vec<(NaiveDateTime, f64)> = Vec::new();
            for r in rows.iter().filter(|r| &r.device == d) {
                match s.iter_mut().find(|e| e.0 == r.timestamp) {
                    Some(e) => e.1 += r.counts as f64,
                    None => s.push((r.timestamp, r.counts as f64)),
                }
            }
            s
        };
        for i in 0..devs.len() {
            for j in 0..devs.len() {
                if i == j {
                    assert_eq!(m.values[i][j], Some(1.0));
                    continue;
                }
                let (a, b) = (series(&devs[i]), series(&devs[j]));
                let (x, y): (Vec<f64>, Vec<f64>) =
                    a.iter().filter_map(|(t, v)| b.iter().find(|e| e.0 == *t).map(|e| (*v, e.1))).unzip();
                assert_eq!(m.overlap[i][j], x.len());
                assert!(close_opt(m.values[i][j], naive_pearson(&x, &y)), "seed {seed} {i} {j}");
            }
        }

        if devs.len() >= 2 {
            let day_sums = |d: &DeviceId| {
                let mut s: Vec<(NaiveDate, f64)> = Vec::new();
                for r in rows.iter().filter(|r| &r.device == d) {
                    match s.iter_mut().find(|e| e.0 == r.date()) {
                        Some(e) => e.1 += r.counts as f64,
                        None => s.push((r.date(), r.counts as f64)),
                    }
                }
                s
            };
            let (a, b) = (day_sums(&devs[0]), day_sums(&devs[1]));
            let (x, y): (Vec<f64>, Vec<f64>) =
                a.iter().filter_map(|(t, v)| b.iter().find(|e| e.0 == *t).map(|e| (*v, e.1))).unzip();
            match similarity_report(rows, &devs[0], &devs[1]) {
                Ok(rep) => {
                    assert_eq!(rep.common_days.len(), x.len());
                    assert!(close_opt(rep.pearson_r, naive_pearson(&x, &y)), "seed {seed}");
                }
                Err(AnalyticsError::NoCommonDays) => assert!(x.is_empty()),
                Err(e) => assert!(matches!(e, AnalyticsError::TooShort | AnalyticsError::ZeroVariance), "{e}"),
            }
        }
    });
}

pub const CHECKS: &[(&str, fn())] = &[
    ("extremes_match", extremes_match),
    ("bucket_sums_match", bucket_sums_match),
    ("daily_means_match", daily_means_match),
    ("circadian_cells_match", circadian_cells_match),
    ("region_weekly_stats_match", region_weekly_stats_match),
    ("bins_match", bins_match),
    ("hourly_profile_matches", hourly_profile_matches),
    ("temperature_summaries_match", temperature_summaries_match),
    ("geo_queries_match", geo_queries_match),
    ("outliers_match", outliers_match),
    ("correlations_match", correlations_match),
];
