//! Proximal Policy Optimization with a clipped surrogate objective and GAE,
//! using separate actor (softmax policy) and critic (scalar value) networks.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentCheckpoint, AgentKind};
use crate::nn::{argmax, softmax, Mode, Network, NetworkConfig, Optimizer, OptimizerConfig, Tensor};
use crate::rl::{gae, Trajectory, Transition};
use crate::{Error, Result, SeedRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Environment steps collected before each update.
    pub horizon: usize,
    pub critic_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    pub actor_optimizer: OptimizerConfig,
    pub critic_optimizer: OptimizerConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.75,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch_size: 64,
            horizon: 512,
            critic_coef: 0.5,
            entropy_coef: 0.0,
            normalize_advantages: true,
            actor_optimizer: OptimizerConfig::default(),
            critic_optimizer: OptimizerConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::Config(format!("PPO clip {} outside (0, 0.5)", self.clip)));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.horizon < self.minibatch_size {
            return Err(Error::Config(
                "PPO needs epochs ≥ 1, minibatch ≥ 1 and horizon ≥ minibatch".into(),
            ));
        }
        Ok(())
    }
}

/// `exp(new − old)`.
pub fn ppo_ratio(new_log_prob: f64, old_log_prob: f64) -> f64 {
    (new_log_prob - old_log_prob).exp()
}

/// `min(R·A, clip(R, 1−ε, 1+ε)·A)`.
pub fn ppo_clip_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

/// Mean squared error between values and targets.
pub fn critic_loss(values: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(values.len(), targets.len(), "critic_loss length mismatch");
    if values.is_empty() {
        return 0.0;
    }
    values
        .iter()
        .zip(targets)
        .map(|(v, t)| (v - t) * (v - t))
        .sum::<f64>()
        / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoDiagnostics {
    /// Mean over minibatches of the negated clipped objective.
    pub policy_loss: f64,
    pub critic_loss: f64,
    pub mean_ratio: f64,
    /// Share of samples with the ratio outside `[1−ε, 1+ε]`, over all epochs.
    pub clip_fraction: f64,
    /// Clip fraction of the very first minibatch (before any step).
    pub initial_clip_fraction: f64,
    /// `max |R − 1|` over the very first minibatch.
    pub initial_max_ratio_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub config: PpoConfig,
    actor: Network,
    critic: Network,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    rollout: Vec<Transition<Tensor>>,
    updates: u64,
    last: Option<PpoDiagnostics>,
}

impl PpoAgent {
    /// `actor` must end in one logit per action; the critic reuses the
    /// actor's architecture with a single output.
    pub fn new(config: PpoConfig, actor: &NetworkConfig, rng: &mut SeedRng) -> Result<Self> {
        config.validate()?;
        let critic_cfg = match actor.clone() {
            NetworkConfig::Dense(mut c) => {
                *c.widths.last_mut().expect("validated widths") = 1;
                NetworkConfig::Dense(c)
            }
            NetworkConfig::Transformer(mut c) => {
                c.output = 1;
                NetworkConfig::Transformer(c)
            }
        };
        let actor = actor.build(rng)?;
        let critic = critic_cfg.build(rng)?;
        Ok(Self {
            actor_opt: config.actor_optimizer.build(),
            critic_opt: config.critic_optimizer.build(),
            config,
            actor,
            critic,
            rollout: Vec::new(),
            updates: 0,
            last: None,
        })
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Network {
        &mut self.actor
    }

    pub fn critic(&self) -> &Network {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut Network {
        &mut self.critic
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn last_diagnostics(&self) -> Option<PpoDiagnostics> {
        self.last
    }

    pub fn probabilities(&self, state: &Tensor) -> Result<Vec<f64>> {
        Ok(softmax(self.actor.predict(state)?.data()))
    }

    /// Returns `(action, log π(action|s), V(s))`. Train mode samples from the
    /// policy; eval mode takes the most probable action.
    pub fn act(&self, state: &Tensor, mode: Mode, rng: &mut SeedRng) -> Result<(usize, f64, f64)> {
        let probs = self.probabilities(state)?;
        let action = match mode {
            Mode::Eval => argmax(&probs),
            Mode::Train => sample_categorical(&probs, rng),
        };
        let value = self.critic.predict(state)?.data()[0];
        Ok((action, probs[action].ln(), value))
    }

    /// Buffer a transition; runs an update when the horizon fills.
    pub fn observe(&mut self, t: Transition<Tensor>, rng: &mut SeedRng) -> Result<Option<PpoDiagnostics>> {
        self.rollout.push(t);
        if self.rollout.len() < self.config.horizon {
            return Ok(None);
        }
        let rollout = std::mem::take(&mut self.rollout);
        self.update(&rollout, rng).map(Some)
    }

    /// Update on whatever is buffered if it fills at least one minibatch;
    /// otherwise discard it.
    pub fn flush(&mut self, rng: &mut SeedRng) -> Result<Option<PpoDiagnostics>> {
        let rollout = std::mem::take(&mut self.rollout);
        if rollout.len() < self.config.minibatch_size {
            return Ok(None);
        }
        self.update(&rollout, rng).map(Some)
    }

    /// One PPO update over a contiguous rollout.
    pub fn update(&mut self, rollout: &[Transition<Tensor>], rng: &mut SeedRng) -> Result<PpoDiagnostics> {
        let n = rollout.len();
        if n < self.config.minibatch_size {
            return Err(Error::NotReady(format!(
                "rollout of {n} is shorter than one minibatch ({})",
                self.config.minibatch_size
            )));
        }
        let states: Vec<&Tensor> = rollout.iter().map(|t| &t.state).collect();
        let all_states = Tensor::stack(&states)?;

        // Advantages and targets against the pre-update critic.
        let mut values = self.critic.predict(&all_states)?.into_data();
        let last = &rollout[n - 1];
        values.push(if last.terminal { 0.0 } else { self.critic.predict(&last.next_state)?.data()[0] });
        let scalar: Vec<Transition<()>> = rollout
            .iter()
            .map(|t| Transition {
                state: (),
                action: t.action,
                reward: t.reward,
                next_state: (),
                terminal: t.terminal,
            })
            .collect();
        let traj = Trajectory::new(scalar, values)?;
        let mut advantages = gae(&traj, self.config.gamma, self.config.lambda);
        let returns: Vec<f64> = advantages.iter().zip(traj.values()).map(|(a, v)| a + v).collect();
        if self.config.normalize_advantages {
            normalize(&mut advantages);
        }

        // π_old is frozen for the whole update.
        let old_logits = self.actor.predict(&all_states)?;
        let actions = old_logits.shape()[1];
        let old_log_probs: Vec<f64> = rollout
            .iter()
            .enumerate()
            .map(|(i, t)| softmax(&old_logits.data()[i * actions..(i + 1) * actions])[t.action].ln())
            .collect();

        let clip = self.config.clip;
        let mut diag = PpoDiagnostics::default();
        let mut minibatches = 0usize;
        let mut samples = 0usize;
        let mut clipped = 0usize;
        let mut ratio_sum = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..self.config.epochs {
            order.shuffle(rng);
            for (mb, chunk) in order.chunks(self.config.minibatch_size).enumerate() {
                let b = chunk.len() as f64;
                let input = Tensor::stack(&chunk.iter().map(|&i| states[i]).collect::<Vec<_>>())?;

                let logits = self.actor.forward(&input, Mode::Train, rng)?;
                let mut grad = Tensor::zeros(logits.shape());
                let mut objective = 0.0;
                let mut mb_clipped = 0usize;
                let mut mb_max_dev: f64 = 0.0;
                for (row, &i) in chunk.iter().enumerate() {
                    let z = &logits.data()[row * actions..(row + 1) * actions];
                    let probs = softmax(z);
                    let a = rollout[i].action;
                    let ratio = ppo_ratio(probs[a].ln(), old_log_probs[i]);
                    let adv = advantages[i];
                    objective += ppo_clip_objective(ratio, adv, clip);
                    ratio_sum += ratio;
                    mb_max_dev = mb_max_dev.max((ratio - 1.0).abs());
                    if ratio < 1.0 - clip || ratio > 1.0 + clip {
                        mb_clipped += 1;
                    }
                    // ∂/∂logp of the min term is R·A when the unclipped branch is active.
                    let unclipped = ratio * adv <= ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
                    let coeff = if unclipped { -ratio * adv / b } else { 0.0 };
                    let entropy: f64 = -probs.iter().map(|p| if *p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>();
                    let g = &mut grad.data_mut()[row * actions..(row + 1) * actions];
                    for (j, gj) in g.iter_mut().enumerate() {
                        let onehot = if j == a { 1.0 } else { 0.0 };
                        *gj = coeff * (onehot - probs[j]);
                        if self.config.entropy_coef != 0.0 && probs[j] > 0.0 {
                            *gj += self.config.entropy_coef * probs[j] * (probs[j].ln() + entropy) / b;
                        }
                    }
                }
                self.actor.backward(&grad)?;
                self.actor.apply_penalty();
                self.actor_opt.step(self.actor.params_mut());

                let v = self.critic.forward(&input, Mode::Train, rng)?;
                let targets: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();
                let mse = critic_loss(v.data(), &targets);
                let vgrad: Vec<f64> = v
                    .data()
                    .iter()
                    .zip(&targets)
                    .map(|(p, t)| 2.0 * self.config.critic_coef * (p - t) / b)
                    .collect();
                self.critic.backward(&Tensor::new(v.shape().to_vec(), vgrad)?)?;
                self.critic.apply_penalty();
                self.critic_opt.step(self.critic.params_mut());

                if epoch == 0 && mb == 0 {
                    diag.initial_clip_fraction = mb_clipped as f64 / b;
                    diag.initial_max_ratio_deviation = mb_max_dev;
                }
                diag.policy_loss += -objective / b;
                diag.critic_loss += mse;
                minibatches += 1;
                samples += chunk.len();
                clipped += mb_clipped;
            }
        }
        diag.policy_loss /= minibatches as f64;
        diag.critic_loss /= minibatches as f64;
        diag.mean_ratio = ratio_sum / samples as f64;
        diag.clip_fraction = clipped as f64 / samples as f64;
        self.updates += 1;
        self.last = Some(diag);
        Ok(diag)
    }

    pub fn checkpoint(&self, generation: usize) -> AgentCheckpoint {
        AgentCheckpoint {
            kind: AgentKind::Ppo,
            network: self.actor.config(),
            primary: self.actor.params().snapshot(),
            secondary_network: self.critic.config(),
            secondary: self.critic.params().snapshot(),
            train_steps: self.updates,
            generation,
        }
    }
}

fn sample_categorical(probs: &[f64], rng: &mut SeedRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn normalize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        xs.iter_mut().for_each(|x| *x -= mean);
        return;
    }
    xs.iter_mut().for_each(|x| *x = (*x - mean) / std);
}
