//! TD(0), TD(λ), discounted returns and GAE on a short hand-written episode.

use anyhow::Result;
use drl_trader::rl::{discounted_returns, gae, td_lambda_episode, trajectory_returns, TraceMode, Trajectory, Transition};

fn main() -> Result<()> {
    let rewards = [0.0, 0.5, -0.2, 1.0, 2.0];
    let transitions: Vec<Transition> = rewards
        .iter()
        .enumerate()
        .map(|(t, &reward)| Transition {
            state: t,
            action: 0,
            reward,
            next_state: t + 1,
            terminal: t + 1 == rewards.len(),
        })
        .collect();
    let values = vec![0.3, 0.1, 0.4, 0.2, 0.6, 0.0];
    let traj = Trajectory::new(transitions.clone(), values.clone())?;

    let gamma = 0.75;
    println!("returns          {:?}", round(&discounted_returns(&rewards, gamma, 0.0)));
    for lambda in [0.0, 0.5, 0.95, 1.0] {
        println!("gae λ={lambda:<4}       {:?}", round(&gae(&traj, gamma, lambda)));
    }
    let baseline: Vec<f64> = trajectory_returns(&traj, gamma).iter().zip(&values).map(|(g, v)| g - v).collect();
    println!("return − value   {:?}", round(&baseline));

    let learned = td_lambda_episode(&transitions, &values, gamma, 0.8, 0.1, TraceMode::Accumulating)?;
    println!("td(0.8) values   {:?}", round(&learned));
    Ok(())
}

fn round(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
