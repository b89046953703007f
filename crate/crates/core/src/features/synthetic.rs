//! Seeded synthetic OHLC series for tests and examples.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Bar;
use crate::SeedRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub start: NaiveDate,
    pub bars: usize,
    pub start_price: f64,
    /// Per-bar drift of the close (e.g. 0.001 = +0.1%).
    pub drift: f64,
    /// Per-bar return standard deviation.
    pub sigma: f64,
    pub skip_weekends: bool,
}

impl SyntheticSpec {
    pub fn daily(start: NaiveDate, bars: usize) -> Self {
        Self {
            start,
            bars,
            start_price: 100.0,
            drift: 0.001,
            sigma: 0.002,
            skip_weekends: false,
        }
    }
}

fn calendar(start: NaiveDate, n: usize, skip_weekends: bool) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !(skip_weekends && matches!(d.weekday(), Weekday::Sat | Weekday::Sun)) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn bars_from_returns(spec: &SyntheticSpec, drifts: &[f64], rng: &mut SeedRng) -> Vec<Bar> {
    let noise = Normal::new(0.0, spec.sigma.max(0.0)).expect("finite sigma");
    let dates = calendar(spec.start, spec.bars, spec.skip_weekends);
    let mut close = spec.start_price;
    let mut out = Vec::with_capacity(spec.bars);
    for (i, date) in dates.into_iter().enumerate() {
        let open = close;
        if i > 0 {
            close *= 1.0 + drifts[i] + noise.sample(rng);
        }
        let wick_hi: f64 = rng.random_range(0.0..spec.sigma.max(1e-6));
        let wick_lo: f64 = rng.random_range(0.0..spec.sigma.max(1e-6));
        out.push(Bar {
            date,
            open,
            high: open.max(close) * (1.0 + wick_hi),
            low: open.min(close) * (1.0 - wick_lo),
            close,
        });
    }
    out
}

/// Constant drift plus Gaussian noise.
pub fn trending(spec: &SyntheticSpec, rng: &mut SeedRng) -> Vec<Bar> {
    let drifts = vec![spec.drift; spec.bars];
    bars_from_returns(spec, &drifts, rng)
}

/// Drift alternating between `+drift` and `−drift` every `regime_len` bars.
pub fn regimes(spec: &SyntheticSpec, regime_len: usize, rng: &mut SeedRng) -> Vec<Bar> {
    let len = regime_len.max(1);
    let drifts: Vec<f64> = (0..spec.bars)
        .map(|i| if (i / len).is_multiple_of(2) { spec.drift } else { -spec.drift })
        .collect();
    bars_from_returns(spec, &drifts, rng)
}
