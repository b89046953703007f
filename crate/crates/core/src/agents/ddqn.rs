//! Double DQN: the primary network picks the next action, the target network
//! scores it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentCheckpoint, AgentKind, ReplayBuffer};
use crate::nn::{argmax, Mode, Network, NetworkConfig, Optimizer, OptimizerConfig, Tensor};
use crate::rl::Transition;
use crate::{Error, Result, SeedRng};

/// Linear ε decay from `start` to `end` over `decay_steps` environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_steps: 10_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdqnConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Hard copy θ⁻ ← θ every this many train steps.
    pub target_sync_every: u64,
    /// Run one train step every this many environment steps.
    pub train_every: u64,
    pub epsilon: EpsilonSchedule,
    pub optimizer: OptimizerConfig,
}

impl Default for DdqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.75,
            batch_size: 64,
            replay_capacity: 50_000,
            target_sync_every: 500,
            train_every: 1,
            epsilon: EpsilonSchedule::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DdqnAgent {
    pub config: DdqnConfig,
    primary: Network,
    target: Network,
    optimizer: Optimizer,
    replay: ReplayBuffer<Transition<Tensor>>,
    env_steps: u64,
    train_steps: u64,
}

impl DdqnAgent {
    pub fn new(config: DdqnConfig, net: &NetworkConfig, rng: &mut SeedRng) -> Result<Self> {
        if config.batch_size == 0 || config.target_sync_every == 0 || config.train_every == 0 {
            return Err(Error::Config("DDQN batch size, sync period and train period must be positive".into()));
        }
        let primary = net.build(rng)?;
        let target = primary.clone();
        Ok(Self {
            optimizer: config.optimizer.build(),
            replay: ReplayBuffer::new(config.replay_capacity),
            config,
            primary,
            target,
            env_steps: 0,
            train_steps: 0,
        })
    }

    pub fn primary(&self) -> &Network {
        &self.primary
    }

    pub fn primary_mut(&mut self) -> &mut Network {
        &mut self.primary
    }

    pub fn target_net(&self) -> &Network {
        &self.target
    }

    pub fn target_net_mut(&mut self) -> &mut Network {
        &mut self.target
    }

    pub fn replay(&self) -> &ReplayBuffer<Transition<Tensor>> {
        &self.replay
    }

    pub fn optimizer_mut(&mut self) -> &mut Optimizer {
        &mut self.optimizer
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.at(self.env_steps)
    }

    pub fn q_values(&self, state: &Tensor) -> Result<Vec<f64>> {
        Ok(self.primary.predict(state)?.into_data())
    }

    /// Eval: greedy with lowest-index ties. Train: ε-greedy.
    pub fn act(&self, state: &Tensor, mode: Mode, rng: &mut SeedRng) -> Result<usize> {
        let actions = self.primary.config().output_width();
        if mode == Mode::Train && rng.random::<f64>() < self.epsilon() {
            return Ok(rng.random_range(0..actions));
        }
        Ok(argmax(&self.q_values(state)?))
    }

    /// `y = r + γ·Q(s', argmax_a' Q(s',a';θ); θ⁻)`, bootstrap dropped when terminal.
    pub fn target(&self, t: &Transition<Tensor>) -> Result<f64> {
        if t.terminal {
            return Ok(t.reward);
        }
        let best = argmax(&self.primary.predict(&t.next_state)?.into_data());
        let q_target = self.target.predict(&t.next_state)?.data()[best];
        Ok(t.reward + self.config.gamma * q_target)
    }

    /// Plain DQN target `r + γ·max_a' Q(s',a';θ⁻)`.
    pub fn dqn_target(&self, t: &Transition<Tensor>) -> Result<f64> {
        if t.terminal {
            return Ok(t.reward);
        }
        let q = self.target.predict(&t.next_state)?.into_data();
        let max = q.into_iter().fold(f64::NEG_INFINITY, f64::max);
        Ok(t.reward + self.config.gamma * max)
    }

    /// θ⁻ ← θ.
    pub fn sync_target(&mut self) -> Result<()> {
        self.target.params_mut().copy_values_from(self.primary.params())
    }

    /// One gradient step on `mean (y − Q(s,a;θ))²` plus the weight penalty.
    /// Returns the loss including the penalty. θ⁻ is not touched.
    pub fn train_step(&mut self, batch: &[&Transition<Tensor>], rng: &mut SeedRng) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::NotReady("empty DDQN batch".into()));
        }
        let targets = self.batch_targets(batch)?;
        let states: Vec<&Tensor> = batch.iter().map(|t| &t.state).collect();
        let input = Tensor::stack(&states)?;
        let q = self.primary.forward(&input, Mode::Train, rng)?;
        let actions = q.shape()[1];
        let n = batch.len() as f64;
        let mut grad = Tensor::zeros(q.shape());
        let mut loss = 0.0;
        for (i, (t, y)) in batch.iter().zip(&targets).enumerate() {
            let pred = q.data()[i * actions + t.action];
            let err = pred - y;
            loss += err * err / n;
            grad.data_mut()[i * actions + t.action] = 2.0 * err / n;
        }
        self.primary.backward(&grad)?;
        loss += self.primary.apply_penalty();
        self.optimizer.step(self.primary.params_mut());
        self.train_steps += 1;
        Ok(loss)
    }

    fn batch_targets(&self, batch: &[&Transition<Tensor>]) -> Result<Vec<f64>> {
        let next: Vec<&Tensor> = batch.iter().map(|t| &t.next_state).collect();
        let input = Tensor::stack(&next)?;
        let q_primary = self.primary.predict(&input)?;
        let q_target = self.target.predict(&input)?;
        let actions = q_primary.shape()[1];
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if t.terminal {
                    return t.reward;
                }
                let row = &q_primary.data()[i * actions..(i + 1) * actions];
                let best = argmax(row);
                t.reward + self.config.gamma * q_target.data()[i * actions + best]
            })
            .collect())
    }

    /// Sample a batch from replay and train on it.
    pub fn learn(&mut self, rng: &mut SeedRng) -> Result<f64> {
        let batch: Vec<Transition<Tensor>> = match self.replay.sample(self.config.batch_size, rng) {
            Some(b) => b.into_iter().cloned().collect(),
            None => {
                return Err(Error::NotReady(format!(
                    "replay holds {} < batch {}",
                    self.replay.len(),
                    self.config.batch_size
                )))
            }
        };
        let refs: Vec<&Transition<Tensor>> = batch.iter().collect();
        self.train_step(&refs, rng)
    }

    /// Store a transition; train and sync on schedule once replay is warm.
    pub fn observe(&mut self, t: Transition<Tensor>, rng: &mut SeedRng) -> Result<Option<f64>> {
        self.replay.push(t);
        self.env_steps += 1;
        if !self.env_steps.is_multiple_of(self.config.train_every) || self.replay.len() < self.config.batch_size {
            return Ok(None);
        }
        let loss = self.learn(rng)?;
        if self.train_steps.is_multiple_of(self.config.target_sync_every) {
            self.sync_target()?;
        }
        Ok(Some(loss))
    }

    pub fn checkpoint(&self, generation: usize) -> AgentCheckpoint {
        AgentCheckpoint {
            kind: AgentKind::Ddqn,
            network: self.primary.config(),
            primary: self.primary.params().snapshot(),
            secondary_network: self.target.config(),
            secondary: self.target.params().snapshot(),
            train_steps: self.train_steps,
            generation,
        }
    }
}
