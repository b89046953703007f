use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl Bar {
    /// `low ≤ min(open, close) ≤ max(open, close) ≤ high`, all positive.
    pub fn is_consistent(&self) -> bool {
        let prices = [self.open, self.high, self.low, self.close];
        prices.iter().all(|p| p.is_finite() && *p > 0.0)
            && self.low <= self.open.min(self.close)
            && self.open.max(self.close) <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based line in the file (the header is line 1).
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: usize,
    pub violations: Vec<Violation>,
    #[serde(skip)]
    pub bars: Vec<Bar>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const CSV_HEADER: [&str; 5] = ["timestamp", "open", "high", "low", "close"];

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let day = s.get(..10)?;
    let rest = &s[10..];
    if !(rest.is_empty() || rest.starts_with('T') || rest.starts_with(' ')) {
        return None;
    }
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

/// Check every row of an OHLC CSV and collect all violations.
pub fn validate_csv_str(text: &str) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    match reader.headers() {
        Ok(h) => {
            let got: Vec<String> = h.iter().map(|s| s.trim().to_ascii_lowercase()).collect();
            if got != CSV_HEADER {
                report.violations.push(Violation {
                    line: 1,
                    message: format!("header must be {}, found {}", CSV_HEADER.join(","), got.join(",")),
                });
                return report;
            }
        }
        Err(e) => {
            report.violations.push(Violation {
                line: 1,
                message: format!("unreadable header: {e}"),
            });
            return report;
        }
    }
    let mut seen: HashMap<NaiveDate, u64> = HashMap::new();
    let mut previous: Option<(NaiveDate, u64)> = None;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.violations.push(Violation {
                    line,
                    message: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        report.rows += 1;
        let line = record.position().map_or(0, |p| p.line());
        let mut bad = |message: String| report.violations.push(Violation { line, message });
        if record.len() != 5 {
            bad(format!("expected 5 fields, found {}", record.len()));
            continue;
        }
        let Some(date) = parse_date(&record[0]) else {
            bad(format!("invalid ISO-8601 date {:?}", &record[0]));
            continue;
        };
        let mut prices = [0.0; 4];
        let mut ok = true;
        for (i, p) in prices.iter_mut().enumerate() {
            match record[i + 1].trim().parse::<f64>() {
                Ok(v) => *p = v,
                Err(_) => {
                    bad(format!("{} is not a number: {:?}", CSV_HEADER[i + 1], &record[i + 1]));
                    ok = false;
                }
            }
        }
        if let Some(&first) = seen.get(&date) {
            bad(format!("duplicate timestamp {date} (also on line {first})"));
            continue;
        }
        seen.insert(date, line);
        if let Some((prev, prev_line)) = previous {
            if date < prev {
                bad(format!("timestamp {date} precedes {prev} on line {prev_line}"));
            }
        }
        previous = Some((date, line));
        if !ok {
            continue;
        }
        let bar = Bar {
            date,
            open: prices[0],
            high: prices[1],
            low: prices[2],
            close: prices[3],
        };
        if !bar.is_consistent() {
            bad(format!(
                "OHLC inconsistent (open {}, high {}, low {}, close {})",
                bar.open, bar.high, bar.low, bar.close
            ));
            continue;
        }
        report.bars.push(bar);
    }
    if report.rows == 0 && report.violations.is_empty() {
        report.violations.push(Violation {
            line: 2,
            message: "no data rows".into(),
        });
    }
    report
}

pub fn validate_csv(path: &Path) -> Result<ValidationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(validate_csv_str(&text))
}

/// Parse a CSV, failing on the first report with any violation.
pub fn read_bars_str(text: &str) -> Result<Vec<Bar>> {
    let report = validate_csv_str(text);
    if !report.is_valid() {
        let lines: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(Error::Data(lines.join("; ")));
    }
    Ok(report.bars)
}

pub fn read_bars(path: &Path) -> Result<Vec<Bar>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_bars_str(&text).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn bars_to_csv(bars: &[Bar]) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for b in bars {
        out.push_str(&format!("{},{},{},{},{}\n", b.date, b.open, b.high, b.low, b.close));
    }
    out
}
