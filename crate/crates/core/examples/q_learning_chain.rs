//! Tabular Q-learning and a DDQN with one-hot states on a five-state chain,
//! both compared against value iteration.

use anyhow::Result;
use drl_trader::agents::{DdqnAgent, DdqnConfig, QTable};
use drl_trader::nn::{DenseNetConfig, Mode, NetworkConfig, OptimizerConfig, Tensor};
use drl_trader::rl::Transition;
use drl_trader::seeded;

const GAMMA: f64 = 0.75;

/// State 4 is terminal. Moving right out of 3 pays 10; staying left at 0 pays 1.2.
fn step(s: usize, a: usize) -> (f64, usize, bool) {
    match (s, a) {
        (3, 1) => (10.0, 4, true),
        (0, 0) => (1.2, 0, false),
        (s, 0) => (0.0, s - 1, false),
        (s, _) => (0.0, s + 1, false),
    }
}

fn one_hot(s: usize) -> Tensor {
    let mut v = vec![0.0; 5];
    v[s] = 1.0;
    Tensor::vector(v)
}

fn main() -> Result<()> {
    let mut vi = [[0.0f64; 2]; 4];
    for _ in 0..2000 {
        let prev = vi;
        for s in 0..4 {
            for a in 0..2 {
                let (r, s2, done) = step(s, a);
                vi[s][a] = if done { r } else { r + GAMMA * prev[s2][0].max(prev[s2][1]) };
            }
        }
    }

    let mut table = QTable::new(2, 0.5, GAMMA);
    let mut batch = Vec::new();
    for _ in 0..300 {
        for s in 0..4 {
            for a in 0..2 {
                let (reward, next_state, terminal) = step(s, a);
                table.update(&Transition { state: s, action: a, reward, next_state, terminal });
            }
        }
    }
    for s in 0..4 {
        for a in 0..2 {
            let (reward, s2, terminal) = step(s, a);
            batch.push(Transition { state: one_hot(s), action: a, reward, next_state: one_hot(s2), terminal });
        }
    }

    let config = DdqnConfig {
        optimizer: OptimizerConfig::adam(3e-3),
        ..DdqnConfig::default()
    };
    let net = NetworkConfig::Dense(DenseNetConfig::new(5, &[32], 2));
    let mut rng = seeded(11);
    let mut agent = DdqnAgent::new(config, &net, &mut rng)?;
    let refs: Vec<_> = batch.iter().collect();
    for i in 1..=8000 {
        agent.train_step(&refs, &mut rng)?;
        if i % 50 == 0 {
            agent.sync_target()?;
        }
    }

    println!("state  value-iteration      tabular              ddqn                 greedy");
    for s in 0..4 {
        let q = agent.q_values(&one_hot(s))?;
        let greedy = agent.act(&one_hot(s), Mode::Eval, &mut rng)?;
        println!(
            "{s}      [{:6.3}, {:6.3}]   [{:6.3}, {:6.3}]   [{:6.3}, {:6.3}]   {} / {}",
            vi[s][0],
            vi[s][1],
            table.get(s, 0),
            table.get(s, 1),
            q[0],
            q[1],
            table.greedy(s),
            greedy
        );
    }
    Ok(())
}
