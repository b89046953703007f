//! OHLC ingestion, indicators, calendar encodings, standardization and
//! lookback windows.

mod indicators;
mod io;
mod scaler;
pub mod synthetic;

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

pub use indicators::{atr, ema, log_returns, macd, rsi, sma, true_range, Macd};
pub use io::{bars_to_csv, read_bars, read_bars_str, validate_csv, validate_csv_str, Bar, ValidationReport, Violation, CSV_HEADER};
pub use scaler::Scaler;

use crate::env::{Observation, Position, Segment};
use crate::nn::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacdSpec {
    pub fast: usize,
    pub slow: usize,
    pub signal: usize,
}

/// Which features to compute, in column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub log_return: bool,
    /// open/close − 1, high/close − 1, low/close − 1.
    pub ohlc_relatives: bool,
    pub rsi: Option<usize>,
    /// close / SMA − 1 per period.
    pub sma: Vec<usize>,
    /// close / EMA − 1 per period.
    pub ema: Vec<usize>,
    /// ATR / close.
    pub atr: Option<usize>,
    /// MACD line, signal and histogram, each divided by the close.
    pub macd: Option<MacdSpec>,
    /// Weekly and yearly sine/cosine.
    pub time_encoding: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            log_return: true,
            ohlc_relatives: true,
            rsi: Some(14),
            sma: vec![10, 50],
            ema: vec![10, 50],
            atr: Some(14),
            macd: Some(MacdSpec {
                fast: 12,
                slow: 26,
                signal: 9,
            }),
            time_encoding: true,
        }
    }
}

impl FeatureSpec {
    /// Log returns only.
    pub fn minimal() -> Self {
        Self {
            log_return: true,
            ohlc_relatives: false,
            rsi: None,
            sma: Vec::new(),
            ema: Vec::new(),
            atr: None,
            macd: None,
            time_encoding: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let periods = self.rsi.iter().chain(&self.sma).chain(&self.ema).chain(self.atr.iter());
        if periods.clone().any(|p| *p == 0) {
            return Err(Error::Config("indicator periods must be positive".into()));
        }
        if let Some(m) = self.macd {
            if m.fast == 0 || m.slow == 0 || m.signal == 0 {
                return Err(Error::Config("MACD periods must be positive".into()));
            }
        }
        if self.names().is_empty() {
            return Err(Error::Config("feature spec enables no features".into()));
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        let mut n = Vec::new();
        if self.log_return {
            n.push("log_return".to_string());
        }
        if self.ohlc_relatives {
            n.extend(["open_rel", "high_rel", "low_rel"].map(String::from));
        }
        if let Some(p) = self.rsi {
            n.push(format!("rsi_{p}"));
        }
        n.extend(self.sma.iter().map(|p| format!("sma_{p}_ratio")));
        n.extend(self.ema.iter().map(|p| format!("ema_{p}_ratio")));
        if let Some(p) = self.atr {
            n.push(format!("atr_{p}"));
        }
        if self.macd.is_some() {
            n.extend(["macd", "macd_signal", "macd_hist"].map(String::from));
        }
        if self.time_encoding {
            n.extend(["week_sin", "week_cos", "year_sin", "year_cos"].map(String::from));
        }
        n
    }

    /// Leading bars without a defined value.
    pub fn warmup(&self) -> usize {
        let mut w = usize::from(self.log_return);
        w = w.max(self.rsi.unwrap_or(0));
        w = w.max(self.atr.unwrap_or(0));
        for p in self.sma.iter().chain(&self.ema) {
            w = w.max(p - 1);
        }
        if let Some(m) = self.macd {
            w = w.max(m.fast.max(m.slow) - 1 + m.signal - 1);
        }
        w
    }
}

/// `(sin, cos)` of the weekly phase (Monday = 0) then of the yearly phase
/// (January 1st = 0).
pub fn time_encoding(date: NaiveDate) -> [f64; 4] {
    let week = date.weekday().num_days_from_monday() as f64 / 7.0;
    let days_in_year = if date.leap_year() { 366.0 } else { 365.0 };
    let year = date.ordinal0() as f64 / days_in_year;
    [(TAU * week).sin(), (TAU * week).cos(), (TAU * year).sin(), (TAU * year).cos()]
}

/// Row-major feature matrix aligned with dates and closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub names: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
    pub values: Vec<f64>,
}

impl FeatureFrame {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn segment(&self) -> Segment<'_> {
        Segment::new(&self.dates, &self.closes, &self.values, self.width()).expect("frame is aligned")
    }

    /// Index of the first row dated on or after `date`.
    pub fn index_at_or_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d < date)
    }
}

fn is_increasing(bars: &[Bar]) -> bool {
    bars.windows(2).all(|w| w[0].date < w[1].date)
}

/// Compute every enabled feature and drop the warm-up rows.
pub fn build_features(bars: &[Bar], spec: &FeatureSpec) -> Result<FeatureFrame> {
    spec.validate()?;
    if !is_increasing(bars) {
        return Err(Error::Data("bars must have strictly increasing dates".into()));
    }
    let warmup = spec.warmup();
    if bars.len() <= warmup {
        return Err(Error::Data(format!("{} bars do not cover the {warmup}-bar warm-up", bars.len())));
    }
    let n = bars.len();
    let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if spec.log_return {
        let mut r = vec![f64::NAN];
        r.extend(log_returns(&closes)?);
        columns.push(r);
    }
    if spec.ohlc_relatives {
        columns.push(bars.iter().map(|b| b.open / b.close - 1.0).collect());
        columns.push(bars.iter().map(|b| b.high / b.close - 1.0).collect());
        columns.push(bars.iter().map(|b| b.low / b.close - 1.0).collect());
    }
    if let Some(p) = spec.rsi {
        columns.push(rsi(&closes, p));
    }
    for &p in &spec.sma {
        columns.push(sma(&closes, p).iter().zip(&closes).map(|(m, c)| c / m - 1.0).collect());
    }
    for &p in &spec.ema {
        columns.push(ema(&closes, p).iter().zip(&closes).map(|(m, c)| c / m - 1.0).collect());
    }
    if let Some(p) = spec.atr {
        columns.push(atr(bars, p).iter().zip(&closes).map(|(a, c)| a / c).collect());
    }
    if let Some(m) = spec.macd {
        let out = macd(&closes, m.fast, m.slow, m.signal);
        for series in [out.line, out.signal, out.histogram] {
            columns.push(series.iter().zip(&closes).map(|(v, c)| v / c).collect());
        }
    }
    if spec.time_encoding {
        let enc: Vec<[f64; 4]> = bars.iter().map(|b| time_encoding(b.date)).collect();
        for k in 0..4 {
            columns.push(enc.iter().map(|e| e[k]).collect());
        }
    }
    let names = spec.names();
    let width = columns.len();
    let mut values = Vec::with_capacity((n - warmup) * width);
    for t in warmup..n {
        for (j, col) in columns.iter().enumerate() {
            let v = col[t];
            if !v.is_finite() {
                return Err(Error::Data(format!("feature {} is not finite at {}", names[j], bars[t].date)));
            }
            values.push(v);
        }
    }
    Ok(FeatureFrame {
        names,
        dates: bars[warmup..].iter().map(|b| b.date).collect(),
        closes: closes[warmup..].to_vec(),
        values,
    })
}

/// Observation for every bar with a full lookback: rows `t−L+1..=t` and the
/// position held at `t`.
pub fn build_windows(frame: &FeatureFrame, positions: &[Position], lookback: usize) -> Result<Vec<Observation>> {
    if lookback == 0 || frame.len() < lookback {
        return Err(Error::Data(format!(
            "{} feature rows cannot fill a lookback of {lookback}",
            frame.len()
        )));
    }
    if positions.len() != frame.len() {
        return Err(Error::Data(format!(
            "position history has {} entries for {} rows",
            positions.len(),
            frame.len()
        )));
    }
    let w = frame.width();
    Ok((lookback - 1..frame.len())
        .map(|t| Observation {
            index: t,
            date: frame.dates[t],
            window: Tensor::new(vec![lookback, w], frame.values[(t + 1 - lookback) * w..(t + 1) * w].to_vec())
                .expect("window shape"),
            position: positions[t],
        })
        .collect())
}
