use chrono::{Duration, NaiveDate};
use drl_trader::env::Position;
use drl_trader::features::synthetic::{regimes, trending, SyntheticSpec};
use drl_trader::features::{
    atr, bars_to_csv, build_features, build_windows, ema, log_returns, macd, rsi, time_encoding, true_range,
    validate_csv_str, Bar, FeatureFrame, FeatureSpec, Scaler,
};
use drl_trader::{seeded, Error};

fn day(i: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + Duration::days(i)
}

fn flat_bars(closes: &[f64]) -> Vec<Bar> {
    closes
        .iter()
        .enumerate()
        .map(|(i, &c)| Bar {
            date: day(i as i64),
            open: c,
            high: c,
            low: c,
            close: c,
        })
        .collect()
}

#[test]
fn log_return_examples() {
    assert!(log_returns(&[5.0; 4]).unwrap().iter().all(|r| *r == 0.0));
    assert!((log_returns(&[100.0, 110.0]).unwrap()[0] - 0.0953101798).abs() < 1e-9);
    assert!((log_returns(&[100.0, 50.0]).unwrap()[0] + std::f64::consts::LN_2).abs() < 1e-12);
    assert!(matches!(log_returns(&[1.0, 0.0]), Err(Error::Data(_))));
}

#[test]
fn rsi_extremes() {
    let up: Vec<f64> = (0..30).map(|i| 10.0 + i as f64).collect();
    let down: Vec<f64> = up.iter().rev().cloned().collect();
    assert!(rsi(&up, 14)[14..].iter().all(|v| *v == 100.0));
    assert!(rsi(&down, 14)[14..].iter().all(|v| *v == 0.0));
    assert!(rsi(&up, 14)[..14].iter().all(|v| v.is_nan()));
}

#[test]
fn rsi_matches_spreadsheet() {
    let c = [
        44.34, 44.09, 44.15, 43.61, 44.33, 44.83, 45.10, 45.42, 45.84, 46.08, 45.89, 46.03, 45.61, 46.28, 46.28,
        46.00,
    ];
    // changes 1..=14: gains and losses summed by hand
    let gains = 0.06 + 0.72 + 0.50 + 0.27 + 0.32 + 0.42 + 0.24 + 0.14 + 0.67;
    let losses = 0.25 + 0.54 + 0.19 + 0.42;
    let (ag, al) = (gains / 14.0, losses / 14.0);
    let rsi14 = 100.0 - 100.0 / (1.0 + ag / al);
    // bar 15 falls by 0.28: Wilder smoothing
    let (ag15, al15) = (ag * 13.0 / 14.0, (al * 13.0 + 0.28) / 14.0);
    let rsi15 = 100.0 - 100.0 / (1.0 + ag15 / al15);
    let out = rsi(&c, 14);
    assert!((out[14] - rsi14).abs() < 1e-8, "{} vs {rsi14}", out[14]);
    assert!((out[15] - rsi15).abs() < 1e-8);
    assert!((out[14] - 70.46).abs() < 0.01);
}

#[test]
fn true_range_and_atr() {
    assert_eq!(true_range(10.0, 8.0, 9.0), 2.0);
    assert_eq!(true_range(12.0, 11.0, 9.0), 3.0);
    assert!(atr(&flat_bars(&[7.0; 20]), 14)[14..].iter().all(|v| *v == 0.0));

    let bars = vec![
        Bar { date: day(0), open: 9.0, high: 9.5, low: 8.5, close: 9.0 },
        Bar { date: day(1), open: 9.0, high: 10.0, low: 8.0, close: 9.5 },
        Bar { date: day(2), open: 11.0, high: 12.0, low: 11.0, close: 11.5 },
        Bar { date: day(3), open: 11.5, high: 11.8, low: 10.0, close: 10.2 },
    ];
    // TR: 2, max(1, 2.5, 1.5) = 2.5, max(1.8, 0.3, 1.5) = 1.8
    let a = atr(&bars, 2);
    assert!((a[2] - 2.25).abs() < 1e-12);
    assert!((a[3] - (2.25 + 1.8) / 2.0).abs() < 1e-12);
}

fn ema_oracle(xs: &[f64], p: usize) -> Vec<Option<f64>> {
    let k = 2.0 / (p as f64 + 1.0);
    let mut out = vec![None; xs.len()];
    let mut prev: Option<f64> = None;
    for i in 0..xs.len() {
        if i + 1 == p {
            prev = Some(xs[..p].iter().sum::<f64>() / p as f64);
        } else if let Some(e) = prev {
            prev = Some(xs[i] * k + e * (1.0 - k));
        }
        out[i] = prev;
    }
    out
}

#[test]
fn macd_step_series_matches_ema_chain() {
    let mut c = vec![1.0; 10];
    c.extend(vec![2.0; 10]);
    let m = macd(&c, 3, 5, 2);
    let fast = ema_oracle(&c, 3);
    let slow = ema_oracle(&c, 5);
    let line: Vec<f64> = (4..20).map(|i| fast[i].unwrap() - slow[i].unwrap()).collect();
    let signal = ema_oracle(&line, 2);
    for i in 4..20 {
        assert!((m.line[i] - line[i - 4]).abs() < 1e-12);
        if let Some(s) = signal[i - 4] {
            assert!((m.signal[i] - s).abs() < 1e-12);
            assert!((m.histogram[i] - (line[i - 4] - s)).abs() < 1e-12);
        } else {
            assert!(m.signal[i].is_nan());
        }
    }
    assert!(m.line[..4].iter().all(|v| v.is_nan()));

    let flat = macd(&[3.0; 60], 12, 26, 9);
    assert!(flat.line[25..].iter().chain(&flat.signal[33..]).chain(&flat.histogram[33..]).all(|v| *v == 0.0));
    let same = macd(&c, 4, 4, 3);
    assert!(same.line[3..].iter().all(|v| *v == 0.0));
    assert!(ema(&c, 3)[..2].iter().all(|v| v.is_nan()));
}

#[test]
fn time_encoding_properties() {
    for i in 0..800 {
        let e = time_encoding(day(i));
        assert!((e[0] * e[0] + e[1] * e[1] - 1.0).abs() < 1e-12);
        assert!((e[2] * e[2] + e[3] * e[3] - 1.0).abs() < 1e-12);
        let later = time_encoding(day(i + 7));
        assert_eq!(e[..2], later[..2]);
    }
    let mid = time_encoding(NaiveDate::from_ymd_opt(2021, 7, 2).unwrap());
    assert!(mid[2].abs() < 0.01);
    assert!((mid[3] + 1.0).abs() < 1e-3);
}

fn frame(values: Vec<f64>, names: &[&str]) -> FeatureFrame {
    let rows = values.len() / names.len();
    FeatureFrame {
        names: names.iter().map(|s| s.to_string()).collect(),
        dates: (0..rows as i64).map(day).collect(),
        closes: vec![1.0; rows],
        values,
    }
}

#[test]
fn scaler_standardizes_fit_span_only() {
    let f = frame(vec![1.0, 10.0, 2.0, 30.0, 3.0, 20.0, 100.0, -5.0], &["a", "b"]);
    let s = Scaler::fit(&f, day(0), day(2)).unwrap();
    assert_eq!(s.mean[0], 2.0);
    assert_eq!(s.std[0], 1.0);
    let t = s.transform(&f).unwrap();
    for j in 0..2 {
        let col: Vec<f64> = (0..3).map(|i| t.row(i)[j]).collect();
        let m = col.iter().sum::<f64>() / 3.0;
        let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!(m.abs() < 1e-10);
        assert!((sd - 1.0).abs() < 1e-8);
    }
    let mut longer = f.clone();
    longer.values.extend([7.0, 7.0, 8.0, 9.0]);
    longer.dates.extend([day(4), day(5)]);
    longer.closes.extend([1.0, 1.0]);
    assert_eq!(Scaler::fit(&longer, day(0), day(2)).unwrap(), s);

    let constant = frame(vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0], &["moving", "stuck"]);
    match Scaler::fit(&constant, day(0), day(2)) {
        Err(Error::Config(m)) => assert!(m.contains("stuck")),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn windows_count_and_truncation() {
    let values: Vec<f64> = (0..50).map(|v| v as f64 * 0.5).collect();
    let f = frame(values, &["x", "y"]);
    let flat = vec![Position::Flat; 25];
    let w = build_windows(&f, &flat, 20).unwrap();
    assert_eq!(w.len(), 6);
    let one = build_windows(&f, &flat, 1).unwrap();
    assert_eq!(one[7].window.data(), f.row(7));
    assert_eq!(one[7].position.one_hot(), [0.0, 0.0, 1.0]);

    let mut cut = f.clone();
    cut.dates.truncate(22);
    cut.closes.truncate(22);
    cut.values.truncate(44);
    let wc = build_windows(&cut, &flat[..22], 20).unwrap();
    assert_eq!(wc.last().unwrap(), &w[2]);
    assert!(matches!(build_windows(&f, &flat, 26), Err(Error::Data(_))));
}

#[test]
fn every_feature_ignores_future_bars() {
    let spec = SyntheticSpec::daily(day(0), 400);
    let bars = regimes(&spec, 60, &mut seeded(3));
    let full = build_features(&bars, &FeatureSpec::default()).unwrap();
    assert!(full.values.iter().all(|v| v.is_finite()));
    assert_eq!(full.len(), 400 - FeatureSpec::default().warmup());
    for cut in [120, 200, 333] {
        let part = build_features(&bars[..cut], &FeatureSpec::default()).unwrap();
        let w = part.width();
        let prefix = &full.values[..part.len() * w];
        assert!(prefix.iter().zip(&part.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn synthetic_series_are_consistent_and_seeded() {
    let spec = SyntheticSpec::daily(day(0), 300);
    let a = trending(&spec, &mut seeded(1));
    let b = trending(&spec, &mut seeded(1));
    assert_eq!(a, b);
    assert!(a.iter().all(Bar::is_consistent));
    assert!(a.last().unwrap().close > a[0].close);
}

#[test]
fn csv_validation_reports_lines() {
    let bars = trending(&SyntheticSpec::daily(day(0), 5), &mut seeded(2));
    let good = bars_to_csv(&bars);
    let report = validate_csv_str(&good);
    assert!(report.is_valid(), "{:?}", report.violations);
    assert_eq!(report.bars, bars);

    let mut lines: Vec<String> = good.lines().map(String::from).collect();
    let b = bars[2];
    lines[3] = format!("{},{},{},{},{}", b.date, b.open, b.low, b.high, b.close);
    let swapped = validate_csv_str(&(lines.join("\n") + "\n"));
    assert_eq!(swapped.violations.len(), 1);
    assert_eq!(swapped.violations[0].line, 4);

    let mut lines: Vec<String> = good.lines().map(String::from).collect();
    let d = bars[1].date.to_string();
    let rest = lines[3].split_once(',').unwrap().1.to_string();
    lines[3] = format!("{d},{rest}");
    let dup = validate_csv_str(&(lines.join("\n") + "\n"));
    assert_eq!(dup.violations.len(), 1);
    assert_eq!(dup.violations[0].line, 4);
    assert!(dup.violations[0].message.contains("line 3"));

    assert!(!validate_csv_str("date,o,h,l,c\n2020-01-01,1,1,1,1\n").is_valid());
}
