//! Learning agents: tabular Q-learning (used as an oracle), Double DQN and
//! PPO, plus frozen policies restored from checkpoints.

mod ddqn;
mod ppo;
mod qtable;
mod replay;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use ddqn::{DdqnAgent, DdqnConfig, EpsilonSchedule};
pub use ppo::{critic_loss, ppo_clip_objective, ppo_ratio, PpoAgent, PpoConfig, PpoDiagnostics};
pub use qtable::QTable;
pub use replay::ReplayBuffer;

use crate::nn::{argmax, Architecture, Mode, Network, NetworkConfig, ParameterSnapshot, Tensor};
use crate::rl::Transition;
use crate::{Error, Result, SeedRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Ddqn,
    Ppo,
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentKind::Ddqn => "ddqn",
            AgentKind::Ppo => "ppo",
        })
    }
}

/// Hyperparameters for either agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AgentConfig {
    Ddqn(DdqnConfig),
    Ppo(PpoConfig),
}

impl AgentConfig {
    pub fn kind(&self) -> AgentKind {
        match self {
            AgentConfig::Ddqn(_) => AgentKind::Ddqn,
            AgentConfig::Ppo(_) => AgentKind::Ppo,
        }
    }

    pub fn build(&self, net: &NetworkConfig, rng: &mut SeedRng) -> Result<Agent> {
        Ok(match self {
            AgentConfig::Ddqn(c) => Agent::Ddqn(DdqnAgent::new(c.clone(), net, rng)?),
            AgentConfig::Ppo(c) => Agent::Ppo(PpoAgent::new(c.clone(), net, rng)?),
        })
    }
}

/// Either learning agent behind the interface the training loop needs.
#[derive(Debug, Clone)]
pub enum Agent {
    Ddqn(DdqnAgent),
    Ppo(PpoAgent),
}

impl Agent {
    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Ddqn(_) => AgentKind::Ddqn,
            Agent::Ppo(_) => AgentKind::Ppo,
        }
    }

    pub fn act(&self, state: &Tensor, mode: Mode, rng: &mut SeedRng) -> Result<usize> {
        match self {
            Agent::Ddqn(a) => a.act(state, mode, rng),
            Agent::Ppo(a) => a.act(state, mode, rng).map(|(action, _, _)| action),
        }
    }

    pub fn observe(&mut self, t: Transition<Tensor>, rng: &mut SeedRng) -> Result<()> {
        match self {
            Agent::Ddqn(a) => a.observe(t, rng).map(|_| ()),
            Agent::Ppo(a) => a.observe(t, rng).map(|_| ()),
        }
    }

    /// Called at the end of a training cycle.
    pub fn end_cycle(&mut self, rng: &mut SeedRng) -> Result<()> {
        match self {
            Agent::Ddqn(_) => Ok(()),
            Agent::Ppo(a) => a.flush(rng).map(|_| ()),
        }
    }

    /// Set the DDQN exploration horizon; no-op for PPO.
    pub fn set_exploration_steps(&mut self, steps: u64) {
        if let Agent::Ddqn(a) = self {
            a.config.epsilon.decay_steps = steps;
        }
    }

    pub fn checkpoint(&self, generation: usize) -> AgentCheckpoint {
        match self {
            Agent::Ddqn(a) => a.checkpoint(generation),
            Agent::Ppo(a) => a.checkpoint(generation),
        }
    }
}

/// Architecture plus parameter snapshots: (θ, θ⁻) for DDQN, (actor, critic)
/// for PPO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub kind: AgentKind,
    pub network: NetworkConfig,
    pub primary: ParameterSnapshot,
    pub secondary_network: NetworkConfig,
    pub secondary: ParameterSnapshot,
    pub train_steps: u64,
    pub generation: usize,
}

impl AgentCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    /// Deterministic greedy policy from the primary (θ or actor) network.
    pub fn policy(&self) -> Result<FrozenPolicy> {
        let mut net = self.network.build(&mut crate::seeded(0))?;
        net.params_mut().load_snapshot(&self.primary)?;
        Ok(FrozenPolicy {
            kind: self.kind,
            architecture: self.network.architecture(),
            net,
        })
    }
}

/// Eval-only policy: argmax of Q-values (DDQN) or of action probabilities
/// (PPO). Shareable across threads.
#[derive(Debug, Clone)]
pub struct FrozenPolicy {
    kind: AgentKind,
    architecture: Architecture,
    net: Network,
}

impl FrozenPolicy {
    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn act(&self, state: &Tensor) -> Result<usize> {
        // softmax is monotone, so argmax over logits equals argmax over probabilities
        Ok(argmax(self.net.predict(state)?.data()))
    }
}

impl crate::env::Policy for FrozenPolicy {
    fn decide(&self, observation: &crate::env::Observation) -> Result<crate::env::Position> {
        let input = observation.encode(self.architecture);
        crate::env::Position::from_index(self.act(&input)?)
    }
}
