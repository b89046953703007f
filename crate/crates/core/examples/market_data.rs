//! CSV round trip, validation, indicator features, train-span scaling and
//! lookback windows.

use anyhow::Result;
use chrono::NaiveDate;
use drl_trader::env::Position;
use drl_trader::features::synthetic::{trending, SyntheticSpec};
use drl_trader::features::{bars_to_csv, build_features, build_windows, validate_csv_str, FeatureSpec, Scaler};
use drl_trader::seeded;

fn main() -> Result<()> {
    let start = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
    let mut spec = SyntheticSpec::daily(start, 520);
    spec.skip_weekends = true;
    let bars = trending(&spec, &mut seeded(3));

    let csv = bars_to_csv(&bars);
    let report = validate_csv_str(&csv);
    println!("{} bars parsed, valid = {}", report.bars.len(), report.is_valid());

    // corrupt one row: high below low
    let mut lines: Vec<&str> = csv.lines().collect();
    let b = bars[10];
    let broken = format!("{},{},{},{},{}", b.date, b.open, b.low * 0.9, b.high, b.close);
    lines[11] = &broken;
    for v in validate_csv_str(&lines.join("\n")).violations {
        println!("  line {}: {}", v.line, v.message);
    }

    let features = FeatureSpec::default();
    let frame = build_features(&bars, &features)?;
    println!(
        "\n{} feature rows × {} columns after {} warm-up bars",
        frame.len(),
        frame.width(),
        features.warmup()
    );
    println!("columns: {}", frame.names.join(", "));

    let train_end = NaiveDate::from_ymd_opt(2021, 12, 31).unwrap();
    let scaler = Scaler::fit(&frame, frame.dates[0], train_end)?;
    let scaled = scaler.transform(&frame)?;
    for (name, (m, s)) in scaler.names.iter().zip(scaler.mean.iter().zip(&scaler.std)).take(4) {
        println!("  {name:<16} mean {m:+.5}  std {s:.5}");
    }

    let positions = vec![Position::Flat; scaled.len()];
    let windows = build_windows(&scaled, &positions, 20)?;
    let first = &windows[0];
    println!(
        "\n{} observations; first decides on {} with a {:?} window",
        windows.len(),
        first.date,
        first.window.shape()
    );
    Ok(())
}
