//! Value-estimation primitives: TD(0), backward-view TD(λ), advantage,
//! discounted returns and generalised advantage estimation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One environment step. `S` is a tabular state id or an encoded observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<S = usize> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    pub terminal: bool,
}

/// Chronological transitions plus critic values `V(s_0) … V(s_n)`; the last
/// entry bootstraps the state after the final transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S = usize> {
    transitions: Vec<Transition<S>>,
    values: Vec<f64>,
}

impl<S> Trajectory<S> {
    pub fn new(transitions: Vec<Transition<S>>, values: Vec<f64>) -> Result<Self> {
        if values.len() != transitions.len() + 1 {
            return Err(Error::dim(
                "trajectory values",
                transitions.len() + 1,
                values.len(),
            ));
        }
        if transitions.iter().any(|t| !t.reward.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("trajectory contains non-finite rewards or values".into()));
        }
        Ok(Self { transitions, values })
    }

    pub fn transitions(&self) -> &[Transition<S>] {
        &self.transitions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Per-step TD errors with terminal masking.
    pub fn td_errors(&self, gamma: f64) -> Vec<f64> {
        self.transitions
            .iter()
            .enumerate()
            .map(|(t, tr)| td0_error(tr.reward, self.values[t], self.values[t + 1], gamma, tr.terminal))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountConfig {
    pub gamma: f64,
    pub lambda: f64,
}

impl DiscountConfig {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma {gamma} outside [0,1)")));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda {lambda} outside [0,1]")));
        }
        Ok(Self { gamma, lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    #[default]
    Accumulating,
    Replacing,
}

/// Eligibility traces keyed by tabular state id.
#[derive(Debug, Clone, Default)]
pub struct EligibilityTable {
    traces: BTreeMap<usize, f64>,
}

impl EligibilityTable {
    pub fn visit(&mut self, state: usize, mode: TraceMode) {
        let z = self.traces.entry(state).or_insert(0.0);
        match mode {
            TraceMode::Accumulating => *z += 1.0,
            TraceMode::Replacing => *z = 1.0,
        }
    }

    pub fn decay(&mut self, factor: f64) {
        self.traces.values_mut().for_each(|z| *z *= factor);
    }

    pub fn get(&self, state: usize) -> f64 {
        self.traces.get(&state).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.traces.iter().map(|(s, z)| (*s, *z))
    }
}

/// `δ = r + γ·V(s')·(1 − terminal) − V(s)`.
pub fn td0_error(reward: f64, value: f64, next_value: f64, gamma: f64, terminal: bool) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * next_value };
    reward + bootstrap - value
}

/// `V ← V + α·δ`.
pub fn td0_update(value: f64, delta: f64, alpha: f64) -> f64 {
    value + alpha * delta
}

/// Backward-view TD(λ) over one episode of tabular transitions. Values are
/// updated online; the returned table is the end-of-episode estimate.
pub fn td_lambda_episode(
    trajectory: &[Transition<usize>],
    values: &[f64],
    gamma: f64,
    lambda: f64,
    alpha: f64,
    mode: TraceMode,
) -> Result<Vec<f64>> {
    if trajectory.is_empty() {
        return Err(Error::Data("td_lambda_episode needs a nonempty trajectory".into()));
    }
    let mut v = values.to_vec();
    let mut traces = EligibilityTable::default();
    for tr in trajectory {
        let vs = *v.get(tr.state).ok_or(Error::UnknownState(tr.state))?;
        let vn = *v.get(tr.next_state).ok_or(Error::UnknownState(tr.next_state))?;
        let delta = td0_error(tr.reward, vs, vn, gamma, tr.terminal);
        traces.visit(tr.state, mode);
        for (s, z) in traces.iter() {
            v[s] += alpha * delta * z;
        }
        traces.decay(gamma * lambda);
    }
    Ok(v)
}

/// `A(s,a) = Q(s,a) − V(s)`.
pub fn advantage(q: f64, v: f64) -> f64 {
    q - v
}

/// Generalised advantage estimates via `A_t = δ_t + γλ·A_{t+1}`, with the
/// recursion cut at terminal transitions.
pub fn gae<S>(trajectory: &Trajectory<S>, gamma: f64, lambda: f64) -> Vec<f64> {
    let deltas = trajectory.td_errors(gamma);
    let mut adv = vec![0.0; deltas.len()];
    let mut next = 0.0;
    for t in (0..deltas.len()).rev() {
        let carry = if trajectory.transitions[t].terminal { 0.0 } else { gamma * lambda * next };
        adv[t] = deltas[t] + carry;
        next = adv[t];
    }
    adv
}

/// `G_t = r_t + γ·G_{t+1}` seeded with `bootstrap` after the last reward.
pub fn discounted_returns(rewards: &[f64], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut next = bootstrap;
    for t in (0..rewards.len()).rev() {
        next = rewards[t] + gamma * next;
        out[t] = next;
    }
    out
}

/// Discounted returns of a trajectory, restarting at terminals and
/// bootstrapping from the final value otherwise.
pub fn trajectory_returns<S>(trajectory: &Trajectory<S>, gamma: f64) -> Vec<f64> {
    let n = trajectory.len();
    let mut out = vec![0.0; n];
    let mut next = trajectory.values[n];
    for t in (0..n).rev() {
        let tr = &trajectory.transitions[t];
        if tr.terminal {
            next = 0.0;
        }
        next = tr.reward + gamma * next;
        out[t] = next;
    }
    out
}
