//! Buy-and-hold and perfect-foresight annual benchmarks over three years of
//! synthetic regimes, at three provision rates.

use anyhow::Result;
use chrono::NaiveDate;
use drl_trader::benchmarks::{annual_positions, annual_returns, run_benchmark, BenchmarkKind, BenchmarkSpec};
use drl_trader::features::synthetic::{regimes, SyntheticSpec};
use drl_trader::metrics::{full_report, reports_to_csv, Annualization};
use drl_trader::seeded;

fn main() -> Result<()> {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let bars = regimes(&SyntheticSpec::daily(start, 1096), 365, &mut seeded(2));
    let dates: Vec<_> = bars.iter().map(|b| b.date).collect();
    let closes: Vec<_> = bars.iter().map(|b| b.close).collect();

    let years = annual_returns(&dates, &closes);
    for (year, position) in annual_positions(&years) {
        println!("{year}: {:+.2}% → {position:?}", 100.0 * years[&year]);
    }

    let mut reports = Vec::new();
    for rate in [0.0001, 0.00025, 0.001] {
        for kind in [BenchmarkKind::BuyAndHold, BenchmarkKind::PerfectAnnual] {
            let spec = BenchmarkSpec {
                kind,
                provision_rate: rate,
                initial_capital: 10_000.0,
            };
            let run = run_benchmark(&dates, &closes, &spec)?;
            let label = format!("{}@{}", kind.label(), rate);
            reports.push(full_report(
                &label,
                &run.equity,
                &run.trades,
                &run.positions,
                Annualization::CRYPTO,
                run.equity.span_years(),
            )?);
        }
    }
    print!("\n{}", reports_to_csv(&reports));
    Ok(())
}
