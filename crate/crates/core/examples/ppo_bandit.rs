//! PPO on a two-armed bandit: arm 1 pays +1, arm 0 pays −1.

use anyhow::Result;
use drl_trader::agents::{ppo_clip_objective, PpoAgent, PpoConfig};
use drl_trader::nn::{DenseNetConfig, Mode, NetworkConfig, OptimizerConfig, Tensor};
use drl_trader::rl::Transition;
use drl_trader::seeded;

fn main() -> Result<()> {
    for ratio in [1.0, 1.5, 0.5] {
        println!(
            "clip(R={ratio}, ε=0.2): A=+1 → {:.2}, A=−1 → {:.2}",
            ppo_clip_objective(ratio, 1.0, 0.2),
            ppo_clip_objective(ratio, -1.0, 0.2)
        );
    }

    let config = PpoConfig {
        horizon: 64,
        minibatch_size: 32,
        actor_optimizer: OptimizerConfig::adam(3e-3),
        critic_optimizer: OptimizerConfig::adam(3e-3),
        ..PpoConfig::default()
    };
    let mut rng = seeded(17);
    let mut agent = PpoAgent::new(config, &NetworkConfig::Dense(DenseNetConfig::new(1, &[8], 2)), &mut rng)?;
    let x = Tensor::vector(vec![1.0]);
    for update in 1..=500 {
        let mut rollout = Vec::with_capacity(64);
        for _ in 0..64 {
            let (action, _, _) = agent.act(&x, Mode::Train, &mut rng)?;
            rollout.push(Transition {
                state: x.clone(),
                action,
                reward: if action == 1 { 1.0 } else { -1.0 },
                next_state: x.clone(),
                terminal: true,
            });
        }
        let diag = agent.update(&rollout, &mut rng)?;
        let p = agent.probabilities(&x)?[1];
        if update % 10 == 0 || p >= 0.99 {
            println!("update {update:>3}: P(pay arm) = {p:.4}, clip fraction {:.3}", diag.clip_fraction);
        }
        if p >= 0.99 {
            break;
        }
    }
    Ok(())
}
