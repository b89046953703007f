use std::collections::HashMap;

use crate::nn::argmax;
use crate::rl::Transition;

/// Tabular action values, default 0 for unseen pairs.
#[derive(Debug, Clone)]
pub struct QTable {
    values: HashMap<(usize, usize), f64>,
    actions: usize,
    pub alpha: f64,
    pub gamma: f64,
}

impl QTable {
    pub fn new(actions: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            values: HashMap::new(),
            actions,
            alpha,
            gamma,
        }
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values.get(&(state, action)).copied().unwrap_or(0.0)
    }

    pub fn row(&self, state: usize) -> Vec<f64> {
        (0..self.actions).map(|a| self.get(state, a)).collect()
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, state: usize) -> usize {
        argmax(&self.row(state))
    }

    /// `Q(s,a) ← Q(s,a) + α[r + γ·max_a' Q(s',a') − Q(s,a)]`, with the max
    /// term dropped on terminal transitions.
    pub fn update(&mut self, t: &Transition) {
        let bootstrap = if t.terminal { 0.0 } else { self.gamma * self.max_value(t.next_state) };
        let q = self.get(t.state, t.action);
        let updated = q + self.alpha * (t.reward + bootstrap - q);
        self.values.insert((t.state, t.action), updated);
    }
}
