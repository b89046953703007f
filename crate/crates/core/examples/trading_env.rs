//! Steps the three-action environment by hand with a moving-average rule and
//! prints the per-bar accounting.

use anyhow::Result;
use chrono::NaiveDate;
use drl_trader::env::{run_policy, EnvConfig, MarketEnv, Observation, Position, Segment};
use drl_trader::features::synthetic::{regimes, SyntheticSpec};
use drl_trader::seeded;

fn main() -> Result<()> {
    let start = NaiveDate::from_ymd_opt(2022, 1, 3).unwrap();
    let bars = regimes(&SyntheticSpec::daily(start, 40), 10, &mut seeded(5));
    let dates: Vec<_> = bars.iter().map(|b| b.date).collect();
    let closes: Vec<_> = bars.iter().map(|b| b.close).collect();
    // one feature per bar: the close relative to the first close
    let features: Vec<f64> = closes.iter().map(|c| c / closes[0] - 1.0).collect();
    let segment = Segment::new(&dates, &closes, &features, 1)?;

    let config = EnvConfig {
        lookback: 5,
        provision_rate: 0.001,
        ..EnvConfig::default()
    };
    // long when the last value is above the window mean, short otherwise
    let trend = |obs: &Observation| {
        let w = obs.window.data();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        if w[w.len() - 1] > mean { Position::Long } else { Position::Short }
    };

    let mut env = MarketEnv::new(config.clone(), segment)?;
    let mut obs = env.reset();
    println!("date        close     action  reward    provision  equity");
    while !env.is_done() {
        let action = trend(&obs);
        let step = env.step(action)?;
        println!(
            "{}  {:8.3}  {:6?}  {:8.4}  {:9.3}  {:10.2}",
            obs.date,
            closes[step.info.index],
            action,
            step.reward,
            step.info.provision,
            step.info.equity
        );
        obs = step.observation;
    }

    let rollout = run_policy(&config, &trend, segment)?;
    println!(
        "\n{} trades, provision {:.2}, final equity {:.2}",
        rollout.trades.len(),
        rollout.trades.provision_sum(),
        rollout.equity.last()
    );
    for t in rollout.trades.trades.iter().take(5) {
        println!("  {:?} {} → {} pnl {:+.2}", t.direction, t.open_date, t.close_date, t.pnl());
    }
    Ok(())
}
