#![allow(dead_code)]

use drl_trader::nn::{Mode, Network, Tensor};
use drl_trader::SeedRng;
use rand::Rng;

/// Loss used by the gradient checks: `Σ c·y + ½Σ y²`.
pub fn probe_loss(output: &Tensor, coeffs: &[f64]) -> f64 {
    output
        .data()
        .iter()
        .zip(coeffs.iter().cycle())
        .map(|(y, c)| c * y + 0.5 * y * y)
        .sum()
}

fn probe_grad(output: &Tensor, coeffs: &[f64]) -> Tensor {
    let data = output
        .data()
        .iter()
        .zip(coeffs.iter().cycle())
        .map(|(y, c)| c + y)
        .collect();
    Tensor::new(output.shape().to_vec(), data).unwrap()
}

/// Compares backprop against central finite differences (step 1e-5) on up to
/// `per_param` randomly chosen entries of every parameter tensor. Returns the
/// maximum relative error `|a − n| / max(|a|, |n|, floor)`.
pub fn max_gradient_error(
    net: &mut Network,
    input: &Tensor,
    coeffs: &[f64],
    per_param: usize,
    floor: f64,
    rng: &mut SeedRng,
) -> f64 {
    let h = 1e-5;
    net.params_mut().zero_grad();
    let out = net.forward(input, Mode::Train, rng).unwrap();
    net.backward(&probe_grad(&out, coeffs)).unwrap();
    let names: Vec<String> = net.params().names().cloned().collect();
    let mut worst: f64 = 0.0;
    for name in names {
        let len = net.params().get(&name).unwrap().value.len();
        let picks: Vec<usize> = if len <= per_param {
            (0..len).collect()
        } else {
            (0..per_param).map(|_| rng.random_range(0..len)).collect()
        };
        for i in picks {
            let analytic = net.params().get(&name).unwrap().grad.data()[i];
            let orig = net.params().get(&name).unwrap().value.data()[i];
            net.params_mut().get_mut(&name).unwrap().value.data_mut()[i] = orig + h;
            let up = probe_loss(&net.predict(input).unwrap(), coeffs);
            net.params_mut().get_mut(&name).unwrap().value.data_mut()[i] = orig - h;
            let down = probe_loss(&net.predict(input).unwrap(), coeffs);
            net.params_mut().get_mut(&name).unwrap().value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(floor);
            let err = (analytic - numeric).abs() / denom;
            worst = worst.max(err);
        }
    }
    worst
}

pub fn random_tensor(shape: &[usize], rng: &mut SeedRng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Denominator floor for gradient relative errors. Central differences at
/// step 1e-5 carry ~1e-10 of rounding noise, so structurally zero gradients
/// (e.g. attention key biases, which softmax ignores) would otherwise produce
/// spurious relative errors.
pub const GRAD_FLOOR: f64 = 1e-5;

use drl_trader::rl::{Trajectory, Transition};

/// Random tabular trajectory with occasional episode ends.
pub fn random_trajectory(len: usize, states: usize, rng: &mut SeedRng) -> Trajectory {
    let mut transitions = Vec::with_capacity(len);
    let mut s = rng.random_range(0..states);
    for i in 0..len {
        let next = rng.random_range(0..states);
        let terminal = i + 1 == len || rng.random::<f64>() < 0.05;
        transitions.push(Transition {
            state: s,
            action: rng.random_range(0..3),
            reward: rng.random_range(-2.0..2.0),
            next_state: next,
            terminal,
        });
        s = next;
    }
    let values = (0..=len).map(|_| rng.random_range(-1.0..1.0)).collect();
    Trajectory::new(transitions, values).unwrap()
}

/// Direct double-loop GAE: `A_t = Σ_{k≥t} (γλ)^{k−t} δ_k`, each sum stopping
/// at the end of the episode containing `t`.
pub fn brute_force_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> Vec<f64> {
    let tr = traj.transitions();
    let v = traj.values();
    let n = tr.len();
    let delta = |k: usize| {
        let boot = if tr[k].terminal { 0.0 } else { gamma * v[k + 1] };
        tr[k].reward + boot - v[k]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                sum += (gamma * lambda).powi((k - t) as i32) * delta(k);
                if tr[k].terminal {
                    break;
                }
            }
            sum
        })
        .collect()
}

/// O(n²) maximum drawdown over all (peak, later bar) pairs. Returns the
/// fraction and the bars from that peak until it is first regained (or the
/// end of the curve).
pub fn brute_force_drawdown(v: &[f64]) -> (f64, usize) {
    let (mut best, mut pair) = (0.0, (0, 0));
    for j in 0..v.len() {
        for i in 0..=j {
            let dd = v[j] / v[i] - 1.0;
            if dd < best || (dd == best && best < 0.0 && j == pair.1 && i > pair.0) {
                best = dd;
                pair = (i, j);
            }
        }
    }
    if best == 0.0 {
        return (0.0, 0);
    }
    let (peak, trough) = pair;
    let end = (trough + 1..v.len()).find(|&k| v[k] >= v[peak]).unwrap_or(v.len() - 1);
    (best, end - peak)
}
