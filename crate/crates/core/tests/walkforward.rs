use chrono::{Datelike, NaiveDate};
use drl_trader::agents::{AgentConfig, PpoConfig};
use drl_trader::benchmarks::{buy_and_hold, BenchmarkKind, BenchmarkSpec};
use drl_trader::env::{EnvConfig, Position};
use drl_trader::features::synthetic::{regimes, SyntheticSpec};
use drl_trader::features::{build_features, Bar, FeatureSpec};
use drl_trader::metrics::Annualization;
use drl_trader::nn::{NetworkSpec, OptimizerConfig};
use drl_trader::walkforward::{
    build_schedule, prepare_window, run_test_chain, run_walkforward, select_generation, stitch, train_window,
    AssetClass, GenerationRecord, SelectionPolicy, Span, TrainingConfig, WalkForwardConfig, WindowSchedule,
};
use drl_trader::{seeded, Error};

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn years(span: &Span) -> (i32, i32) {
    (span.start.year(), span.end.year())
}

#[test]
fn fx_schedule_layout() {
    let s = build_schedule(AssetClass::Fx.train_start(), 2018, 5).unwrap();
    assert_eq!(s.windows.len(), 5);
    for (k, w) in s.windows.iter().enumerate() {
        let k = k as i32;
        assert_eq!(w.train.start, ymd(2005, 1, 1));
        assert_eq!(w.train.end, ymd(2017 + k, 12, 31));
        assert_eq!(years(&w.validation), (2018 + k, 2018 + k));
        assert_eq!(years(&w.test), (2019 + k, 2019 + k));
        assert_eq!(w.validation.start, ymd(2018 + k, 1, 1));
        assert_eq!(w.test.end, ymd(2019 + k, 12, 31));
    }
    assert_eq!(s.test_span(), Span { start: ymd(2019, 1, 1), end: ymd(2023, 12, 31) });
    assert_eq!(build_schedule(AssetClass::Crypto.train_start(), 2018, 5).unwrap().windows[0].train.start, ymd(2013, 1, 1));
    assert_eq!(build_schedule(ymd(2005, 1, 1), 2018, 1).unwrap().windows.len(), 1);
    assert!(matches!(build_schedule(ymd(2005, 1, 1), 2018, 0), Err(Error::Schedule(_))));
}

#[test]
fn coverage_errors_name_the_gap() {
    let s = build_schedule(ymd(2005, 1, 1), 2018, 5).unwrap();
    s.check_coverage(ymd(2005, 1, 3), ymd(2023, 12, 29)).unwrap();
    match s.check_coverage(ymd(2005, 1, 3), ymd(2022, 6, 30)) {
        Err(Error::Schedule(m)) => assert!(m.contains("2022-07-01..=2023-12-31"), "{m}"),
        other => panic!("expected schedule error, got {other:?}"),
    }
    match s.check_coverage(ymd(2007, 1, 1), ymd(2023, 12, 31)) {
        Err(Error::Schedule(m)) => assert!(m.contains("2005-01-01..=2006-12-31"), "{m}"),
        other => panic!("expected schedule error, got {other:?}"),
    }
}

fn record(generation: usize, sharpe: Option<f64>) -> GenerationRecord {
    GenerationRecord {
        generation,
        validation_sharpe: sharpe,
        validation_final_balance: 10_000.0,
    }
}

#[test]
fn selection_rules() {
    let policy = SelectionPolicy::default();
    let only = select_generation(&[record(0, Some(0.4))], &policy).unwrap();
    assert_eq!(only.chosen.generation, 0);
    assert!(only.neighbors.iter().all(|n| n.record.is_none()));
    assert!(only.warning.is_none());

    let sharpes = [5.0, 4.0, 0.1, 0.9, 0.3];
    let records: Vec<_> = sharpes.iter().enumerate().map(|(i, s)| record(i, Some(*s))).collect();
    let sel = select_generation(&records, &policy).unwrap();
    assert_eq!(sel.chosen.generation, 3);
    let reported: Vec<(usize, bool)> = sel.neighbors.iter().map(|n| (n.generation, n.record.is_some())).collect();
    assert_eq!(reported, vec![(1, true), (2, true), (4, true), (5, false)]);
    assert!(sel.warning.is_some());

    let tied = [record(0, Some(1.0)), record(1, Some(2.0)), record(2, Some(2.0))];
    assert_eq!(select_generation(&tied, &policy).unwrap().chosen.generation, 1);

    let undefined = [record(0, None), record(1, None), record(2, Some(-0.5))];
    assert_eq!(select_generation(&undefined, &policy).unwrap().chosen.generation, 2);

    assert!(matches!(select_generation(&[], &policy), Err(Error::Selection(_))));
}

fn synthetic(years: usize, seed: u64) -> Vec<Bar> {
    let mut spec = SyntheticSpec::daily(ymd(2015, 1, 1), years * 366);
    spec.drift = 0.001;
    spec.sigma = 0.002;
    regimes(&spec, 60, &mut seeded(seed))
}

fn small_config(cycles: usize) -> WalkForwardConfig {
    let mut ppo = PpoConfig::default();
    ppo.horizon = 128;
    ppo.minibatch_size = 32;
    ppo.actor_optimizer = OptimizerConfig::adam(1e-3);
    ppo.critic_optimizer = OptimizerConfig::adam(1e-3);
    WalkForwardConfig {
        features: FeatureSpec::minimal(),
        env: EnvConfig {
            lookback: 5,
            ..EnvConfig::default()
        },
        agent: AgentConfig::Ppo(ppo),
        network: NetworkSpec::Dense {
            hidden: vec![16],
            dropout: 0.0,
            l1: 0.0,
            l2: 0.0,
        },
        training: TrainingConfig {
            cycles,
            ..TrainingConfig::default()
        },
        selection: SelectionPolicy::default(),
        annualization: Annualization::CRYPTO,
        seed: 11,
    }
}

fn two_windows() -> WindowSchedule {
    build_schedule(ymd(2015, 1, 1), 2019, 2).unwrap()
}

#[test]
fn window_segments_never_overlap() {
    let bars = synthetic(7, 1);
    let raw = build_features(&bars, &FeatureSpec::default()).unwrap();
    for w in &two_windows().windows {
        let d = prepare_window(&raw, w, 20).unwrap();
        assert!(d.scaler.fit_end <= w.train.end);
        assert!(d.frame.dates[d.train.clone()].iter().all(|x| w.train.contains(*x)));
        let val = d.validation_segment();
        assert!(val.dates().iter().all(|x| *x < w.test.start));
        assert_eq!(val.dates()[19], d.frame.dates[d.frame.index_at_or_after(w.validation.start)]);
        let test = d.test_segment();
        assert_eq!(test.dates()[19], d.frame.dates[d.frame.index_at_or_after(w.test.start)]);
        assert!(test.dates()[20..test.len() - 1].iter().all(|x| w.test.contains(*x)));
    }
}

#[test]
fn training_is_seeded() {
    let bars = synthetic(7, 2);
    let cfg = small_config(3);
    let raw = build_features(&bars, &cfg.features).unwrap();
    let d = prepare_window(&raw, &two_windows().windows[0], cfg.env.lookback).unwrap();
    let a = train_window(&d, &cfg, 5).unwrap();
    let b = train_window(&d, &cfg, 5).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.checkpoints, b.checkpoints);
    assert_eq!(a.records.len(), 3);
    assert!(a.records.iter().enumerate().all(|(i, r)| r.generation == i));

    let none = train_window(&d, &small_config(0), 5).unwrap();
    assert!(none.records.is_empty());
    assert!(matches!(select_generation(&none.records, &cfg.selection), Err(Error::Selection(_))));
}

#[test]
fn fixed_policies_chain_across_windows() {
    let bars = synthetic(7, 3);
    let cfg = small_config(0);
    let raw = build_features(&bars, &cfg.features).unwrap();
    let prepared: Vec<_> = two_windows()
        .windows
        .iter()
        .map(|w| prepare_window(&raw, w, cfg.env.lookback).unwrap())
        .collect();
    let segments: Vec<_> = prepared.iter().map(|d| d.test_segment()).collect();

    let flat = run_test_chain(&cfg.env, &segments, &[Position::Flat, Position::Flat]).unwrap();
    let (curve, trades, _) = stitch(&flat).unwrap();
    assert!(curve.values().iter().all(|v| *v == cfg.env.initial_capital));
    assert!(trades.is_empty());

    let long = run_test_chain(&cfg.env, &segments, &[Position::Long, Position::Long]).unwrap();
    let (curve, trades, positions) = stitch(&long).unwrap();
    assert_eq!(trades.len(), 1);
    assert!(positions.iter().all(|p| *p == Position::Long));
    let start = raw.index_at_or_after(ymd(2020, 1, 1));
    let end = raw.index_at_or_after(*curve.dates().last().unwrap()) + 1;
    let dates = &raw.dates[start..end];
    let closes = &raw.closes[start..end];
    let spec = BenchmarkSpec {
        kind: BenchmarkKind::BuyAndHold,
        provision_rate: cfg.env.provision_rate,
        initial_capital: cfg.env.initial_capital,
    };
    let bh = buy_and_hold(dates, closes, &spec).unwrap();
    assert_eq!(curve.dates(), bh.equity.dates());
    for (a, b) in curve.values().iter().zip(bh.equity.values()) {
        assert!((a - b).abs() <= 1e-9 * b, "{a} vs {b}");
    }
}

#[test]
fn stitched_equity_is_the_product_of_window_ratios() {
    let bars = synthetic(7, 4);
    let cfg = small_config(4);
    let out = run_walkforward(&bars, &two_windows(), &cfg).unwrap();
    assert_eq!(out.windows.len(), 2);
    let product: f64 = out.windows.iter().map(|w| w.end_equity() / w.start_equity()).product();
    let expected = cfg.env.initial_capital * product;
    assert!((out.equity.last() - expected).abs() <= 1e-10 * expected);
    assert_eq!(out.windows[1].start_equity(), out.windows[0].end_equity());
    assert_eq!(out.strategy, "ppo-dense");
    assert_eq!(out.report.total_trades, out.trades.len());
    assert_eq!(out.equity.dates()[0], out.windows[0].test.equity.dates()[0]);
    assert_eq!(out.equity.dates()[0].year(), 2020);
}
