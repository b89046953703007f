mod common;

use common::{brute_force_gae, random_trajectory};
use drl_trader::rl::{
    gae, td0_error, td0_update, td_lambda_episode, trajectory_returns, TraceMode, Transition,
};
use drl_trader::seeded;
use proptest::prelude::*;

fn tr(s: usize, r: f64, s2: usize, terminal: bool) -> Transition {
    Transition {
        state: s,
        action: 0,
        reward: r,
        next_state: s2,
        terminal,
    }
}

/// Offline forward view: λ-return built from n-step returns with the
/// pre-episode values.
fn forward_view(chain: &[Transition], values: &[f64], gamma: f64, lambda: f64, alpha: f64) -> Vec<f64> {
    let big_t = chain.len();
    let mut out = values.to_vec();
    for t in 0..big_t {
        let n_step = |n: usize| {
            let mut g = 0.0;
            for i in 0..n {
                g += gamma.powi(i as i32) * chain[t + i].reward;
            }
            let last = &chain[t + n - 1];
            if !last.terminal {
                g += gamma.powi(n as i32) * values[last.next_state];
            }
            g
        };
        let horizon = big_t - t;
        let mut lambda_return = 0.0;
        for n in 1..horizon {
            lambda_return += (1.0 - lambda) * lambda.powi(n as i32 - 1) * n_step(n);
        }
        lambda_return += lambda.powi(horizon as i32 - 1) * n_step(horizon);
        out[chain[t].state] += alpha * (lambda_return - values[chain[t].state]);
    }
    out
}

#[test]
fn three_state_chain_matches_forward_view() {
    let chain = vec![tr(0, 1.0, 1, false), tr(1, 0.0, 2, false), tr(2, 2.0, 3, true)];
    let values = vec![0.5, -0.3, 0.8, 0.0];
    let (gamma, lambda, alpha) = (0.75, 0.5, 0.1);
    let backward = td_lambda_episode(&chain, &values, gamma, lambda, alpha, TraceMode::Accumulating).unwrap();
    let oracle = forward_view(&chain, &values, gamma, lambda, alpha);
    for (a, b) in backward.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12, "{backward:?} vs {oracle:?}");
    }
    // Frozen from the forward-view oracle above.
    let frozen = [0.5 + 0.1 * (1.0 + 0.75 * -0.3 * 0.5 + 0.5 * 0.75 * (0.0 + 0.75 * 0.8 * 0.5 + 0.5 * 0.75 * 2.0) - 0.5),
        -0.3 + 0.1 * (0.5 * 0.75 * 0.8 + 0.5 * 0.75 * 2.0 + 0.3),
        0.8 + 0.1 * (2.0 - 0.8)];
    for (a, b) in backward.iter().zip(&frozen) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn gae_matches_brute_force_on_random_trajectories() {
    let mut rng = seeded(21);
    for i in 0..50 {
        let traj = random_trajectory(1 + i * 4, 7, &mut rng);
        let fast = gae(&traj, 0.75, 0.9);
        let slow = brute_force_gae(&traj, 0.75, 0.9);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn gae_lambda_one_is_return_minus_baseline() {
    let mut rng = seeded(22);
    for len in [1, 5, 40, 200] {
        let traj = random_trajectory(len, 5, &mut rng);
        let adv = gae(&traj, 0.75, 1.0);
        let ret = trajectory_returns(&traj, 0.75);
        for t in 0..len {
            assert!((adv[t] - (ret[t] - traj.values()[t])).abs() < 1e-10);
        }
    }
}

proptest! {
    #[test]
    fn td_lambda_zero_equals_sequential_td0(seed in 0u64..500, len in 1usize..40) {
        let mut rng = seeded(seed);
        let traj = random_trajectory(len, 4, &mut rng);
        let values: Vec<f64> = traj.values()[..4.min(traj.values().len())].to_vec();
        let mut values = values;
        values.resize(4, 0.25);
        let alpha = 0.1;
        let got = td_lambda_episode(traj.transitions(), &values, 0.75, 0.0, alpha, TraceMode::Accumulating).unwrap();
        let mut expected = values.clone();
        for t in traj.transitions() {
            let d = td0_error(t.reward, expected[t.state], expected[t.next_state], 0.75, t.terminal);
            expected[t.state] = td0_update(expected[t.state], d, alpha);
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn gae_is_pure(seed in 0u64..200) {
        let mut rng = seeded(seed);
        let traj = random_trajectory(30, 5, &mut rng);
        prop_assert_eq!(gae(&traj, 0.75, 0.95), gae(&traj, 0.75, 0.95));
    }
}
