//! Anchored walk-forward training of a small PPO agent on synthetic regimes:
//! per-window generation selection, chained out-of-sample test years and a
//! buy-and-hold comparison on the same span.
//!
//! `cargo run --release --example walk_forward -- [ppo|ddqn] [dense|transformer] [cycles]`

use anyhow::{bail, Result};
use chrono::NaiveDate;
use drl_trader::agents::{AgentConfig, DdqnConfig, PpoConfig};
use drl_trader::benchmarks::{buy_and_hold, BenchmarkKind, BenchmarkSpec};
use drl_trader::env::EnvConfig;
use drl_trader::features::synthetic::{regimes, SyntheticSpec};
use drl_trader::features::FeatureSpec;
use drl_trader::metrics::{full_report, Annualization};
use drl_trader::nn::NetworkSpec;
use drl_trader::seeded;
use drl_trader::walkforward::{build_schedule, run_walkforward, SelectionPolicy, TrainingConfig, WalkForwardConfig};

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let agent = match args.first().map(String::as_str).unwrap_or("ppo") {
        "ppo" => AgentConfig::Ppo(PpoConfig::default()),
        "ddqn" => AgentConfig::Ddqn(DdqnConfig {
            train_every: 4,
            ..DdqnConfig::default()
        }),
        other => bail!("unknown agent {other}"),
    };
    let network = match args.get(1).map(String::as_str).unwrap_or("dense") {
        "dense" => NetworkSpec::dense(),
        "transformer" => NetworkSpec::transformer(),
        other => bail!("unknown network {other}"),
    };
    let cycles = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(20);

    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let bars = regimes(&SyntheticSpec::daily(start, 8 * 366), 60, &mut seeded(7));
    let schedule = build_schedule(start, 2020, 2)?;
    for w in &schedule.windows {
        println!("window {}: train {} validate {} test {}", w.index, w.train, w.validation, w.test);
    }

    let config = WalkForwardConfig {
        features: FeatureSpec::default(),
        env: EnvConfig::default(),
        agent,
        network,
        training: TrainingConfig {
            cycles,
            ..TrainingConfig::default()
        },
        selection: SelectionPolicy::default(),
        annualization: Annualization::CRYPTO,
        seed: 1,
    };
    let result = run_walkforward(&bars, &schedule, &config)?;

    for w in &result.windows {
        let s = &w.selection;
        println!(
            "window {}: generation {} (validation Sharpe {:?}), test {:.2} → {:.2}",
            w.window.index,
            s.chosen.generation,
            s.chosen.validation_sharpe.map(|x| (x * 100.0).round() / 100.0),
            w.start_equity(),
            w.end_equity()
        );
        if let Some(warning) = &s.warning {
            println!("  warning: {warning}");
        }
    }

    let d = result.equity.dates();
    let first = bars.iter().position(|b| b.date == d[0]).unwrap();
    let last = bars.iter().position(|b| b.date == d[d.len() - 1]).unwrap();
    let dates: Vec<_> = bars[first..=last].iter().map(|b| b.date).collect();
    let closes: Vec<_> = bars[first..=last].iter().map(|b| b.close).collect();
    let spec = BenchmarkSpec {
        kind: BenchmarkKind::BuyAndHold,
        provision_rate: config.env.provision_rate,
        initial_capital: config.env.initial_capital,
    };
    let bh = buy_and_hold(&dates, &closes, &spec)?;
    let bh = full_report("buy-and-hold", &bh.equity, &bh.trades, &bh.positions, config.annualization, bh.equity.span_years())?;

    for r in [&result.report, &bh] {
        println!(
            "{:<14} final {:>10.2}  CAGR {:+6.2}%  Sharpe {:>6.2}  max DD {:6.2}%  trades {}",
            r.strategy,
            r.final_balance,
            100.0 * r.cagr,
            r.sharpe.unwrap_or(f64::NAN),
            100.0 * r.max_drawdown,
            r.total_trades
        );
    }
    Ok(())
}
