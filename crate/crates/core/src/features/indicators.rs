//! Technical indicators aligned with their input: entry `t` uses bars
//! `≤ t` only, and warm-up entries are `NaN`.

use super::Bar;
use crate::{Error, Result};

/// `ln(c_t / c_{t−1})` for `t ≥ 1` (one shorter than the input).
pub fn log_returns(closes: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = closes.iter().position(|c| !(*c > 0.0)) {
        return Err(Error::Data(format!("non-positive close {} at index {i}", closes[i])));
    }
    Ok(closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

pub fn sma(values: &[f64], period: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; values.len()];
    if period == 0 || values.len() < period {
        return out;
    }
    let mut sum: f64 = values[..period].iter().sum();
    out[period - 1] = sum / period as f64;
    for t in period..values.len() {
        sum += values[t] - values[t - period];
        out[t] = sum / period as f64;
    }
    out
}

/// EMA with `α = 2/(period+1)`, seeded with the SMA of the first `period`
/// defined values. Leading `NaN`s in the input are skipped.
pub fn ema(values: &[f64], period: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; values.len()];
    let start = values.iter().position(|v| !v.is_nan()).unwrap_or(values.len());
    if period == 0 || values.len() < start + period {
        return out;
    }
    let alpha = 2.0 / (period as f64 + 1.0);
    let seed_at = start + period - 1;
    let mut e = values[start..=seed_at].iter().sum::<f64>() / period as f64;
    out[seed_at] = e;
    for t in seed_at + 1..values.len() {
        e = alpha * values[t] + (1.0 - alpha) * e;
        out[t] = e;
    }
    out
}

/// Wilder RSI in `[0, 100]`; first value at index `period`. A window with
/// no losses gives 100 (50 when there are no gains either).
pub fn rsi(closes: &[f64], period: usize) -> Vec<f64> {
    let n = closes.len();
    let mut out = vec![f64::NAN; n];
    if period == 0 || n <= period {
        return out;
    }
    let change = |t: usize| closes[t] - closes[t - 1];
    let (mut gain, mut loss) = (0.0, 0.0);
    for t in 1..=period {
        gain += change(t).max(0.0);
        loss += (-change(t)).max(0.0);
    }
    gain /= period as f64;
    loss /= period as f64;
    let value = |g: f64, l: f64| {
        if l == 0.0 {
            if g == 0.0 {
                50.0
            } else {
                100.0
            }
        } else {
            100.0 - 100.0 / (1.0 + g / l)
        }
    };
    out[period] = value(gain, loss);
    let p = period as f64;
    for t in period + 1..n {
        gain = (gain * (p - 1.0) + change(t).max(0.0)) / p;
        loss = (loss * (p - 1.0) + (-change(t)).max(0.0)) / p;
        out[t] = value(gain, loss);
    }
    out
}

/// `max(H−L, |H−C_prev|, |L−C_prev|)`.
pub fn true_range(high: f64, low: f64, prev_close: f64) -> f64 {
    (high - low).max((high - prev_close).abs()).max((low - prev_close).abs())
}

/// Wilder ATR; first value at index `period` (mean TR of bars `1..=period`).
pub fn atr(bars: &[Bar], period: usize) -> Vec<f64> {
    let n = bars.len();
    let mut out = vec![f64::NAN; n];
    if period == 0 || n <= period {
        return out;
    }
    let tr = |t: usize| true_range(bars[t].high, bars[t].low, bars[t - 1].close);
    let mut a = (1..=period).map(tr).sum::<f64>() / period as f64;
    out[period] = a;
    let p = period as f64;
    for t in period + 1..n {
        a = (a * (p - 1.0) + tr(t)) / p;
        out[t] = a;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Macd {
    pub line: Vec<f64>,
    pub signal: Vec<f64>,
    pub histogram: Vec<f64>,
}

pub fn macd(closes: &[f64], fast: usize, slow: usize, signal: usize) -> Macd {
    let f = ema(closes, fast);
    let s = ema(closes, slow);
    let line: Vec<f64> = f.iter().zip(&s).map(|(a, b)| a - b).collect();
    let sig = ema(&line, signal);
    let histogram = line.iter().zip(&sig).map(|(a, b)| a - b).collect();
    Macd {
        line,
        signal: sig,
        histogram,
    }
}
