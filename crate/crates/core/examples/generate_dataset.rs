//! Writes seeded synthetic OHLC files that the sample configs under
//! `configs/` point at.
//!
//! `cargo run --example generate_dataset -- [out_dir]`

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use drl_trader::features::synthetic::{regimes, trending, SyntheticSpec};
use drl_trader::features::{bars_to_csv, validate_csv_str};
use drl_trader::seeded;

fn main() -> Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();

    let mut spec = SyntheticSpec::daily(start, 8 * 366);
    spec.drift = 0.001;
    spec.sigma = 0.002;
    let files = [
        ("regimes.csv", regimes(&spec, 60, &mut seeded(7))),
        ("trend.csv", {
            let mut s = spec;
            s.drift = 0.0003;
            s.sigma = 0.01;
            s.skip_weekends = true;
            s.bars = 8 * 262;
            trending(&s, &mut seeded(8))
        }),
    ];
    for (name, bars) in files {
        let text = bars_to_csv(&bars);
        let report = validate_csv_str(&text);
        anyhow::ensure!(report.is_valid(), "{name}: {:?}", report.violations);
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{}: {} bars {}..{}",
            path.display(),
            bars.len(),
            bars[0].date,
            bars[bars.len() - 1].date
        );
    }
    Ok(())
}
