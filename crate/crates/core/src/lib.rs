//! Deep reinforcement learning trading engine.
//!
//! Trains Double DQN and PPO agents, backed by either a dense feed-forward
//! network or a transformer encoder, on daily OHLC series. Agents are trained
//! and selected under an anchored walk-forward schedule and compared against
//! buy-and-hold and perfect-foresight annual benchmarks.
//!
//! Module map:
//!
//! - [`nn`]: tensors, dense and transformer networks with manual backprop, Adam
//! - [`rl`]: TD(0), TD(λ), advantage, GAE and discounted returns
//! - [`agents`]: tabular Q-learning, DDQN and PPO
//! - [`env`]: the three-action trading environment
//! - [`features`]: CSV ingestion, indicators, scaling and lookback windows
//! - [`metrics`]: CAGR, Sharpe, Sortino, drawdown and trade statistics
//! - [`benchmarks`]: buy-and-hold and perfect annual strategies
//! - [`walkforward`]: schedules, per-window training and generation selection
//! - [`app`]: config files, run artifacts and report merging used by the binary
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod agents;
pub mod app;
pub mod benchmarks;
pub mod env;
mod error;
pub mod features;
pub mod metrics;
pub mod nn;
pub mod rl;
pub mod walkforward;

pub use error::{Error, Result};

/// Seeded random stream used everywhere randomness is consumed.
pub type SeedRng = rand_chacha::ChaCha8Rng;

/// Build a [`SeedRng`] from a 64-bit seed.
pub fn seeded(seed: u64) -> SeedRng {
    use rand::SeedableRng;
    SeedRng::seed_from_u64(seed)
}
