use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::FeatureFrame;
use crate::{Error, Result};

/// Per-feature z-score fitted on a date span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fit_start: NaiveDate,
    pub fit_end: NaiveDate,
}

impl Scaler {
    /// Fit on rows dated within `[start, end]`; sample (n−1) σ.
    pub fn fit(frame: &FeatureFrame, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let rows: Vec<usize> = (0..frame.len())
            .filter(|&i| (start..=end).contains(&frame.dates[i]))
            .collect();
        if rows.len() < 2 {
            return Err(Error::Data(format!(
                "scaler fit span {start}..={end} holds {} rows; need at least 2",
                rows.len()
            )));
        }
        let width = frame.width();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for &i in &rows {
            for (m, v) in mean.iter_mut().zip(frame.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for &i in &rows {
            for ((s, v), m) in var.iter_mut().zip(frame.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / (n - 1.0)).sqrt()).collect();
        for (j, (s, m)) in std.iter().zip(&mean).enumerate() {
            if !(*s > 1e-12 * m.abs().max(1.0)) {
                return Err(Error::Config(format!(
                    "feature {:?} is constant over {start}..={end}; cannot standardize",
                    frame.names[j]
                )));
            }
        }
        Ok(Self {
            names: frame.names.clone(),
            mean,
            std,
            fit_start: frame.dates[rows[0]],
            fit_end: frame.dates[*rows.last().expect("non-empty")],
        })
    }

    pub fn transform(&self, frame: &FeatureFrame) -> Result<FeatureFrame> {
        if frame.names != self.names {
            return Err(Error::Config("scaler fitted on a different feature set".into()));
        }
        let width = frame.width();
        let values = frame
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.mean[k % width]) / self.std[k % width])
            .collect();
        Ok(FeatureFrame {
            values,
            ..frame.clone()
        })
    }
}
