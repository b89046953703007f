//! Performance statistics for a hand-built monthly equity curve.

use anyhow::Result;
use chrono::{Months, NaiveDate};
use drl_trader::env::Position;
use drl_trader::metrics::{cagr, full_report, max_drawdown, sharpe, sortino, Annualization, EquityCurve};

fn main() -> Result<()> {
    println!("CAGR 10,000 → 14,444.74 over 5 years: {:.2}%", 100.0 * cagr(10_000.0, 14_444.74, 5.0)?);

    let start = NaiveDate::from_ymd_opt(2023, 1, 2).unwrap();
    let values = [100.0, 104.0, 101.0, 97.0, 99.0, 103.0, 106.0, 102.0, 108.0, 107.0, 111.0];
    let dates = (0..values.len()).map(|i| start + Months::new(i as u32)).collect();
    let curve = EquityCurve::new(dates, values.to_vec())?;
    // monthly marks
    let n = Annualization::new(12.0)?;

    let returns = curve.returns();
    println!("sharpe  {:.3}", sharpe(&returns, n).unwrap_or(f64::NAN));
    println!("sortino {:.3}", sortino(&returns, n).unwrap_or(f64::NAN));
    let dd = max_drawdown(&curve);
    println!(
        "max drawdown {:.2}% from bar {} to {}, lasting {} bars (recovered at {:?})",
        100.0 * dd.fraction,
        dd.peak,
        dd.trough,
        dd.duration,
        dd.recovery
    );

    let positions = [
        Position::Long,
        Position::Long,
        Position::Short,
        Position::Short,
        Position::Flat,
        Position::Long,
        Position::Long,
        Position::Long,
        Position::Flat,
        Position::Long,
    ];
    let report = full_report("example", &curve, &Default::default(), &positions, n, curve.span_years())?;
    println!("\n{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
