use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment accumulators.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update from the gradient slots, then zero them.
    pub fn step(&mut self, params: &mut ParameterSet) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powf(self.step as f64);
        let bc2 = 1.0 - beta2.powf(self.step as f64);
        for (name, p) in params.iter_mut() {
            let n = p.value.len();
            let m = self.first.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.second.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let grads = p.grad.data();
            for (((w, &g), mi), vi) in p.value.data_mut().iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            p.grad.fill(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adam(AdamConfig),
    Sgd { learning_rate: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam(AdamConfig::default())
    }
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig::Adam(AdamConfig {
            learning_rate,
            ..AdamConfig::default()
        })
    }

    pub fn build(&self) -> Optimizer {
        match *self {
            OptimizerConfig::Adam(c) => Optimizer::adam(c),
            OptimizerConfig::Sgd { learning_rate } => Optimizer::sgd(learning_rate),
        }
    }
}

/// Optimizer choice. Plain SGD exists mainly so tests can compare parameter
/// deltas against hand-derived gradients.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd { learning_rate: f64, steps: u64 },
}

impl Optimizer {
    pub fn adam(config: AdamConfig) -> Self {
        Optimizer::Adam(AdamState::new(config))
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Optimizer::Sgd {
            learning_rate,
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParameterSet) {
        match self {
            Optimizer::Adam(state) => state.step(params),
            Optimizer::Sgd { learning_rate, steps } => {
                *steps += 1;
                for (_, p) in params.iter_mut() {
                    let grads = p.grad.data().to_vec();
                    for (w, g) in p.value.data_mut().iter_mut().zip(grads) {
                        *w -= *learning_rate * g;
                    }
                    p.grad.fill(0.0);
                }
            }
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        match self {
            Optimizer::Adam(state) => state.config.learning_rate = lr,
            Optimizer::Sgd { learning_rate, .. } => *learning_rate = lr,
        }
    }

    pub fn step_count(&self) -> u64 {
        match self {
            Optimizer::Adam(state) => state.step_count(),
            Optimizer::Sgd { steps, .. } => *steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, Tensor};

    fn scalar(w: f64) -> ParameterSet {
        let mut p = ParameterSet::new(Architecture::Dense);
        p.insert("w", Tensor::vector(vec![w]), true).unwrap();
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = scalar(1.5);
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut p);
        assert_eq!(p.get("w").unwrap().value.data(), &[1.5]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_is_learning_rate_sized() {
        let mut p = scalar(0.0);
        p.get_mut("w").unwrap().grad.data_mut()[0] = 1.0;
        let mut adam = AdamState::new(AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        });
        adam.step(&mut p);
        // m̂ = 1, v̂ = 1 → Δ = −0.1·1/(1 + 1e-8)
        let w = p.get("w").unwrap().value.data()[0];
        assert!((w + 0.1 / (1.0 + 1e-8)).abs() < 1e-15, "{w}");
        assert_eq!(p.get("w").unwrap().grad.data(), &[0.0]);
    }

    #[test]
    fn constant_gradient_moves_by_learning_rate() {
        let mut p = scalar(0.0);
        let mut adam = AdamState::new(AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        });
        let mut last = 0.0;
        for _ in 0..200 {
            p.get_mut("w").unwrap().grad.data_mut()[0] = 0.37;
            adam.step(&mut p);
            let w = p.get("w").unwrap().value.data()[0];
            let delta: f64 = w - last;
            assert!((delta.abs() - 0.01).abs() < 1e-6);
            last = w;
        }
    }
}
