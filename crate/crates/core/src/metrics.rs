//! Performance statistics over an equity curve and its trade log.
//!
//! Metrics that are undefined for the input (zero volatility, no losing
//! bars, no trades) are `None`, serialized as `null` in JSON and `NA` in CSV.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::env::{Position, TradeLog};
use crate::{Error, Result};

/// Equity sampled at every bar. Values are positive, except that a ruined
/// account may end at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl EquityCurve {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() || dates.is_empty() {
            return Err(Error::Data(format!(
                "equity curve needs matching non-empty dates and values ({} vs {})",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!("equity curve dates not increasing at {}", dates[w + 1])));
        }
        // zero is allowed only as the final, absorbing value of a ruined account
        let last = values.len() - 1;
        if let Some(i) = values
            .iter()
            .enumerate()
            .position(|(i, v)| !(v.is_finite() && (*v > 0.0 || (i == last && *v == 0.0))))
        {
            return Err(Error::Data(format!("equity {} at {} is not positive", values[i], dates[i])));
        }
        Ok(Self { dates, values })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    /// Per-bar simple returns `e_t / e_{t−1} − 1`.
    pub fn returns(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
    }

    /// `e_t / max_{s≤t} e_s − 1` per bar.
    pub fn drawdowns(&self) -> Vec<f64> {
        let mut peak = f64::NEG_INFINITY;
        self.values
            .iter()
            .map(|&v| {
                peak = peak.max(v);
                v / peak - 1.0
            })
            .collect()
    }

    /// Calendar span in years (days / 365.25).
    pub fn span_years(&self) -> f64 {
        let days = (*self.dates.last().expect("non-empty") - self.dates[0]).num_days();
        days as f64 / 365.25
    }

    /// Join a continuation whose first point duplicates this curve's last.
    pub fn append(&mut self, next: &EquityCurve) -> Result<()> {
        let skip = usize::from(next.dates[0] == *self.dates.last().expect("non-empty"));
        let mut dates = std::mem::take(&mut self.dates);
        let mut values = std::mem::take(&mut self.values);
        dates.extend_from_slice(&next.dates[skip..]);
        values.extend_from_slice(&next.values[skip..]);
        *self = Self::new(dates, values)?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,equity,drawdown\n");
        for ((d, v), dd) in self.dates.iter().zip(&self.values).zip(self.drawdowns()) {
            let _ = writeln!(out, "{d},{v},{dd}");
        }
        out
    }
}

/// Bars per year used to annualize volatility, Sharpe and Sortino.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annualization {
    pub periods_per_year: f64,
}

impl Annualization {
    /// Six trading days a week.
    pub const FX: Self = Self { periods_per_year: 312.0 };
    pub const EQUITIES: Self = Self { periods_per_year: 252.0 };
    pub const CRYPTO: Self = Self { periods_per_year: 365.0 };

    pub fn new(periods_per_year: f64) -> Result<Self> {
        if !(periods_per_year > 0.0 && periods_per_year.is_finite()) {
            return Err(Error::Config(format!("periods per year {periods_per_year} must be positive")));
        }
        Ok(Self { periods_per_year })
    }
}

/// Compound annual growth rate `(end/begin)^(1/years) − 1`.
pub fn cagr(begin: f64, end: f64, years: f64) -> Result<f64> {
    if !(begin > 0.0) {
        return Err(Error::Domain(format!("CAGR needs a positive starting balance, got {begin}")));
    }
    if !(years > 0.0) {
        return Err(Error::Domain(format!("CAGR needs a positive period, got {years} years")));
    }
    if end < 0.0 {
        return Err(Error::Domain(format!("CAGR undefined for negative end balance {end}")));
    }
    Ok((end / begin).powf(1.0 / years) - 1.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1); `None` below two observations.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Annualized Sharpe with a zero risk-free rate; `None` when σ is zero or
/// there are fewer than two returns.
pub fn sharpe(returns: &[f64], n: Annualization) -> Option<f64> {
    let sd = sample_std(returns)?;
    if sd == 0.0 {
        return None;
    }
    Some(mean(returns) / sd * n.periods_per_year.sqrt())
}

/// Downside deviation `√(Σ min(r,0)² / n)` over all observations.
pub fn downside_deviation(returns: &[f64]) -> Option<f64> {
    if returns.is_empty() {
        return None;
    }
    let ss: f64 = returns.iter().map(|r| r.min(0.0).powi(2)).sum();
    Some((ss / returns.len() as f64).sqrt())
}

/// Annualized Sortino with target 0; `None` without a negative return.
pub fn sortino(returns: &[f64], n: Annualization) -> Option<f64> {
    if !returns.iter().any(|r| *r < 0.0) {
        return None;
    }
    let dd = downside_deviation(returns)?;
    Some(mean(returns) / dd * n.periods_per_year.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drawdown {
    /// Deepest `e/peak − 1` (≤ 0).
    pub fraction: f64,
    /// Bars from the peak until equity first regains it, or until the end
    /// of the curve.
    pub duration: usize,
    pub peak: usize,
    pub trough: usize,
    pub recovery: Option<usize>,
}

pub fn max_drawdown(curve: &EquityCurve) -> Drawdown {
    let v = curve.values();
    let mut peak_idx = 0;
    let mut best = Drawdown {
        fraction: 0.0,
        duration: 0,
        peak: 0,
        trough: 0,
        recovery: Some(0),
    };
    for (t, &x) in v.iter().enumerate() {
        if x >= v[peak_idx] {
            peak_idx = t;
        }
        let dd = x / v[peak_idx] - 1.0;
        if dd < best.fraction {
            best.fraction = dd;
            best.peak = peak_idx;
            best.trough = t;
        }
    }
    if best.fraction < 0.0 {
        let peak_value = v[best.peak];
        best.recovery = (best.trough + 1..v.len()).find(|&i| v[i] >= peak_value);
        best.duration = best.recovery.unwrap_or(v.len() - 1) - best.peak;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeStats {
    pub total_trades: usize,
    pub avg_duration: Option<f64>,
    pub win_rate: Option<f64>,
    /// Provision paid, as a non-positive cash flow.
    pub provision_sum: f64,
    pub pct_long: f64,
    pub pct_short: f64,
    pub pct_out: f64,
}

/// A trade wins when its exit equity, net of its provision, beats its entry.
pub fn trade_stats(log: &TradeLog, positions: &[Position]) -> TradeStats {
    let total = log.len();
    let (avg_duration, win_rate) = if total == 0 {
        (None, None)
    } else {
        let bars: usize = log.trades.iter().map(|t| t.bars).sum();
        let wins = log.trades.iter().filter(|t| t.pnl() > 0.0).count();
        (Some(bars as f64 / total as f64), Some(wins as f64 / total as f64))
    };
    let count = |p: Position| positions.iter().filter(|&&q| q == p).count();
    let (long, short) = (count(Position::Long), count(Position::Short));
    let n = positions.len();
    let (pct_long, pct_short, pct_out) = if n == 0 {
        (0.0, 0.0, 1.0)
    } else {
        let out = n - long - short;
        (long as f64 / n as f64, short as f64 / n as f64, out as f64 / n as f64)
    };
    TradeStats {
        total_trades: total,
        avg_duration,
        win_rate,
        provision_sum: -log.provision_sum(),
        pct_long,
        pct_short,
        pct_out,
    }
}

/// One strategy's row of the comparison table. Fractions, not percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub strategy: String,
    pub final_balance: f64,
    pub provision_sum: f64,
    pub total_trades: usize,
    pub cagr: f64,
    pub annualized_std: Option<f64>,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub max_drawdown: f64,
    pub max_drawdown_duration: usize,
    pub avg_position_duration: Option<f64>,
    pub win_rate: Option<f64>,
    pub pct_long: f64,
    pub pct_short: f64,
    pub pct_out: f64,
}

pub const REPORT_COLUMNS: [&str; 15] = [
    "strategy",
    "final_balance",
    "provision_sum",
    "total_trades",
    "cagr",
    "annualized_std",
    "sharpe",
    "sortino",
    "max_drawdown",
    "max_drawdown_duration",
    "avg_position_duration",
    "win_rate",
    "pct_long",
    "pct_short",
    "pct_out",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl PerformanceReport {
    pub fn csv_header() -> String {
        REPORT_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        [
            self.strategy.clone(),
            self.final_balance.to_string(),
            self.provision_sum.to_string(),
            self.total_trades.to_string(),
            self.cagr.to_string(),
            opt(self.annualized_std),
            opt(self.sharpe),
            opt(self.sortino),
            self.max_drawdown.to_string(),
            self.max_drawdown_duration.to_string(),
            opt(self.avg_position_duration),
            opt(self.win_rate),
            self.pct_long.to_string(),
            self.pct_short.to_string(),
            self.pct_out.to_string(),
        ]
        .join(",")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// CSV table with a header and one row per report.
pub fn reports_to_csv(reports: &[PerformanceReport]) -> String {
    let mut out = PerformanceReport::csv_header();
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Assemble every column. `years` is the CAGR exponent's period.
pub fn full_report(
    strategy: &str,
    curve: &EquityCurve,
    log: &TradeLog,
    positions: &[Position],
    annualization: Annualization,
    years: f64,
) -> Result<PerformanceReport> {
    let returns = curve.returns();
    let dd = max_drawdown(curve);
    let stats = trade_stats(log, positions);
    Ok(PerformanceReport {
        strategy: strategy.to_string(),
        final_balance: curve.last(),
        provision_sum: stats.provision_sum,
        total_trades: stats.total_trades,
        cagr: cagr(curve.initial(), curve.last(), years)?,
        annualized_std: sample_std(&returns).map(|s| s * annualization.periods_per_year.sqrt()),
        sharpe: sharpe(&returns, annualization),
        sortino: sortino(&returns, annualization),
        max_drawdown: dd.fraction,
        max_drawdown_duration: dd.duration,
        avg_position_duration: stats.avg_duration,
        win_rate: stats.win_rate,
        pct_long: stats.pct_long,
        pct_short: stats.pct_short,
        pct_out: stats.pct_out,
    })
}
