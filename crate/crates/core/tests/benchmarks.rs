use chrono::{Duration, NaiveDate};
use drl_trader::benchmarks::{
    annual_positions, annual_returns, buy_and_hold, perfect_annual, BenchmarkKind, BenchmarkSpec,
};
use drl_trader::env::Position;
use proptest::prelude::*;

fn spec(kind: BenchmarkKind, rate: f64) -> BenchmarkSpec {
    BenchmarkSpec {
        kind,
        provision_rate: rate,
        initial_capital: 10_000.0,
    }
}

fn daily(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    (0..n).map(|i| start + Duration::days(i as i64)).collect()
}

#[test]
fn buy_and_hold_examples() {
    let d = daily(NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(), 50);
    let flat = vec![1.1; 50];
    let out = buy_and_hold(&d, &flat, &spec(BenchmarkKind::BuyAndHold, 0.0001)).unwrap();
    assert_eq!(out.trades.len(), 1);
    assert!((out.trades.provision_sum() - 1.0).abs() < 1e-12);
    assert!((out.equity.last() - 9_999.0).abs() < 1e-9);

    let doubling: Vec<f64> = (0..50).map(|i| 2f64.powf(i as f64 / 49.0)).collect();
    let out = buy_and_hold(&d, &doubling, &spec(BenchmarkKind::BuyAndHold, 0.0001)).unwrap();
    assert!((out.equity.last() - 19_998.0).abs() < 1e-6);
    assert_eq!(out.trades.trades[0].bars, 49);
}

/// Two calendar years, +5% then −5% measured first-close to first-close,
/// each move happening on a single bar.
fn two_year_series() -> (Vec<NaiveDate>, Vec<f64>) {
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    let n = 365 + 365;
    let d = daily(start, n);
    let c: Vec<f64> = (0..n)
        .map(|i| match i {
            0..=199 => 100.0,
            200..=599 => 105.0,
            _ => 99.75,
        })
        .collect();
    (d, c)
}

#[test]
fn perfect_annual_hand_compounding() {
    let (d, c) = two_year_series();
    let r = annual_returns(&d, &c);
    assert!((r[&2021] - 0.05).abs() < 1e-12);
    assert!((r[&2022] + 0.05).abs() < 1e-12);
    let p = annual_positions(&r);
    assert_eq!((p[&2021], p[&2022]), (Position::Long, Position::Short));

    let rate = 0.0001;
    let out = perfect_annual(&d, &c, &spec(BenchmarkKind::PerfectAnnual, rate)).unwrap();
    let first = 10_000.0 * (1.0 - rate) * 1.05;
    let expected = first * (1.0 - rate) * 1.05;
    assert!((out.equity.last() - expected).abs() < 1e-7);
    assert_eq!(out.trades.len(), 2);
    assert!((out.trades.provision_sum() - (10_000.0 * rate + first * rate)).abs() < 1e-9);
}

#[test]
fn annual_sign_rules() {
    let mut r = std::collections::BTreeMap::new();
    for (y, v) in [(2019, 0.1), (2020, -0.2), (2021, -0.1), (2022, 0.3), (2023, 0.05)] {
        r.insert(y, v);
    }
    let p: Vec<Position> = annual_positions(&r).into_values().collect();
    let openings = 1 + p.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(openings, 3);

    r.insert(2021, 0.0);
    let p = annual_positions(&r);
    assert_eq!(p[&2021], Position::Short);
}

#[test]
fn all_positive_years_equal_buy_and_hold() {
    let d = daily(NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(), 1000);
    let c: Vec<f64> = (0..1000).map(|i| 50.0 * 1.0004f64.powi(i) * (1.0 + 0.01 * ((i as f64) * 0.3).sin())).collect();
    let s = spec(BenchmarkKind::PerfectAnnual, 0.0001);
    let p = perfect_annual(&d, &c, &s).unwrap();
    let b = buy_and_hold(&d, &c, &s).unwrap();
    assert_eq!(p.trades.len(), 1);
    assert_eq!(p.equity, b.equity);
}

proptest! {
    #[test]
    fn perfect_dominates_without_costs(moves in prop::collection::vec(-0.03f64..0.03, 400..1500)) {
        let d = daily(NaiveDate::from_ymd_opt(2018, 3, 1).unwrap(), moves.len());
        let mut p = 100.0;
        let c: Vec<f64> = moves.iter().map(|m| { p *= 1.0 + m; p }).collect();
        let s = spec(BenchmarkKind::PerfectAnnual, 0.0);
        let perfect = perfect_annual(&d, &c, &s).unwrap();
        let hold = buy_and_hold(&d, &c, &s).unwrap();
        prop_assert!(perfect.equity.last() >= hold.equity.last() * (1.0 - 1e-12));
        let years: Vec<Position> = annual_positions(&annual_returns(&d, &c)).into_values().collect();
        let flips = years.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert_eq!(perfect.trades.len(), 1 + flips);
    }
}
