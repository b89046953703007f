//! Reference strategies: buy-and-hold and the perfect-foresight annual
//! strategy. Both run through the trading environment so their curves, trade
//! logs and reports share the agents' accounting.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::env::{run_policy, EnvConfig, Observation, Position, Rollout, Segment};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    BuyAndHold,
    PerfectAnnual,
}

impl BenchmarkKind {
    pub fn label(self) -> &'static str {
        match self {
            BenchmarkKind::BuyAndHold => "buy-and-hold",
            BenchmarkKind::PerfectAnnual => "perfect-annual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub provision_rate: f64,
    pub initial_capital: f64,
}

impl BenchmarkSpec {
    fn env(&self) -> EnvConfig {
        EnvConfig {
            provision_rate: self.provision_rate,
            reward_scale: 1.0,
            lookback: 1,
            initial_capital: self.initial_capital,
        }
    }
}

fn check<'a>(dates: &'a [NaiveDate], closes: &'a [f64]) -> Result<Segment<'a>> {
    if closes.len() < 2 {
        return Err(Error::Data("a benchmark needs at least two bars".into()));
    }
    Segment::prices(dates, closes)
}

/// Long from the first bar to the last: one opening, one provision.
pub fn buy_and_hold(dates: &[NaiveDate], closes: &[f64], spec: &BenchmarkSpec) -> Result<Rollout> {
    let seg = check(dates, closes)?;
    run_policy(&spec.env(), &Position::Long, seg)
}

/// Return of each calendar year from its first close to the first close of
/// the next year (or the series' last close for the final year).
pub fn annual_returns(dates: &[NaiveDate], closes: &[f64]) -> BTreeMap<i32, f64> {
    let mut firsts: Vec<(i32, usize)> = Vec::new();
    for (i, d) in dates.iter().enumerate() {
        if firsts.last().is_none_or(|(y, _)| *y != d.year()) {
            firsts.push((d.year(), i));
        }
    }
    firsts
        .iter()
        .enumerate()
        .map(|(k, &(year, start))| {
            let end = firsts.get(k + 1).map_or(closes.len() - 1, |&(_, i)| i);
            (year, closes[end] / closes[start] - 1.0)
        })
        .collect()
}

/// Position per calendar year from the sign of that year's return. A flat
/// year keeps the previous position; the first defaults to Long.
pub fn annual_positions(returns: &BTreeMap<i32, f64>) -> BTreeMap<i32, Position> {
    let mut prev = Position::Long;
    returns
        .iter()
        .map(|(&y, &r)| {
            if r > 0.0 {
                prev = Position::Long;
            } else if r < 0.0 {
                prev = Position::Short;
            }
            (y, prev)
        })
        .collect()
}

/// Holds, through each calendar year, the direction that year's return
/// turns out to have.
pub fn perfect_annual(dates: &[NaiveDate], closes: &[f64], spec: &BenchmarkSpec) -> Result<Rollout> {
    let seg = check(dates, closes)?;
    let positions = annual_positions(&annual_returns(dates, closes));
    let policy = |o: &Observation| positions[&o.date.year()];
    run_policy(&spec.env(), &policy, seg)
}

pub fn run_benchmark(dates: &[NaiveDate], closes: &[f64], spec: &BenchmarkSpec) -> Result<Rollout> {
    match spec.kind {
        BenchmarkKind::BuyAndHold => buy_and_hold(dates, closes, spec),
        BenchmarkKind::PerfectAnnual => perfect_annual(dates, closes, spec),
    }
}
