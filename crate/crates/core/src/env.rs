//! Episodic single-asset trading environment.
//!
//! The agent decides at the close of bar `t` using feature rows
//! `t−L+1..=t`; the position then earns the close-to-close return of bar
//! `t+1`. Opening a position (from Flat, or a direction flip) charges one
//! provision of `rate × equity` and commits all remaining capital; nothing
//! is reinvested while the position is unchanged.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::metrics::EquityCurve;
use crate::nn::{Architecture, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Long,
    Short,
    Flat,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Long, Position::Short, Position::Flat];

    /// Action index: Long 0, Short 1, Flat 2.
    pub fn index(self) -> usize {
        match self {
            Position::Long => 0,
            Position::Short => 1,
            Position::Flat => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Domain(format!("action index {i} out of range 0..3")))
    }

    pub fn sign(self) -> f64 {
        match self {
            Position::Long => 1.0,
            Position::Short => -1.0,
            Position::Flat => 0.0,
        }
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }

    /// Whether moving from `self` to `next` opens a new position.
    pub fn opens(self, next: Position) -> bool {
        next != Position::Flat && next != self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Fraction of equity charged per position opening.
    pub provision_rate: f64,
    pub reward_scale: f64,
    pub lookback: usize,
    pub initial_capital: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            provision_rate: 0.0001,
            reward_scale: 100.0,
            lookback: 20,
            initial_capital: 10_000.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.provision_rate) {
            return Err(Error::Config(format!("provision rate {} outside [0, 1)", self.provision_rate)));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::Config(format!("reward scale {} must be positive", self.reward_scale)));
        }
        if self.lookback == 0 {
            return Err(Error::Config("lookback must be at least 1".into()));
        }
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return Err(Error::Config("initial capital must be positive".into()));
        }
        Ok(())
    }
}

/// `rate × equity`.
pub fn provision_charge(equity: f64, rate: f64) -> f64 {
    rate * equity
}

/// Borrowed view of aligned dates, closes and a row-major feature matrix.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    dates: &'a [NaiveDate],
    closes: &'a [f64],
    features: &'a [f64],
    width: usize,
}

impl<'a> Segment<'a> {
    pub fn new(dates: &'a [NaiveDate], closes: &'a [f64], features: &'a [f64], width: usize) -> Result<Self> {
        if dates.len() != closes.len() || features.len() != closes.len() * width {
            return Err(Error::Data(format!(
                "segment misaligned: {} dates, {} closes, {} feature values at width {width}",
                dates.len(),
                closes.len(),
                features.len()
            )));
        }
        if let Some(i) = closes.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Data(format!("non-positive or non-finite close at row {i}")));
        }
        Ok(Self {
            dates,
            closes,
            features,
            width,
        })
    }

    /// Prices only; observations carry an empty window.
    pub fn prices(dates: &'a [NaiveDate], closes: &'a [f64]) -> Result<Self> {
        Self::new(dates, closes, &[], 0)
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dates(&self) -> &'a [NaiveDate] {
        self.dates
    }

    pub fn closes(&self) -> &'a [f64] {
        self.closes
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }

    /// Sub-range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dates: &self.dates[start..end],
            closes: &self.closes[start..end],
            features: &self.features[start * self.width..end * self.width],
            width: self.width,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Bar index within the segment of the decision bar.
    pub index: usize,
    pub date: NaiveDate,
    /// `[lookback, width]`, oldest row first.
    pub window: Tensor,
    pub position: Position,
}

impl Observation {
    /// Network input: dense nets get the flattened window followed by the
    /// position one-hot; transformers get the one-hot appended to every row.
    pub fn encode(&self, architecture: Architecture) -> Tensor {
        let (rows, width) = (self.window.shape()[0], self.window.shape()[1]);
        let hot = self.position.one_hot();
        match architecture {
            Architecture::Dense => {
                let mut v = Vec::with_capacity(rows * width + 3);
                v.extend_from_slice(self.window.data());
                v.extend_from_slice(&hot);
                Tensor::vector(v)
            }
            Architecture::Transformer => {
                let mut v = Vec::with_capacity(rows * (width + 3));
                for r in 0..rows {
                    v.extend_from_slice(&self.window.data()[r * width..(r + 1) * width]);
                    v.extend_from_slice(&hot);
                }
                Tensor::new(vec![rows, width + 3], v).expect("shape matches data")
            }
        }
    }

    /// Input width the encoding produces per time step (transformer) or in
    /// total (dense).
    pub fn encoded_width(architecture: Architecture, lookback: usize, features: usize) -> usize {
        match architecture {
            Architecture::Dense => lookback * features + 3,
            Architecture::Transformer => features + 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub equity: f64,
    pub position: Position,
    pub provision: f64,
    /// The bar the return was realised over.
    pub index: usize,
    /// Equity was exhausted; the episode ended here.
    pub ruined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub open_date: NaiveDate,
    pub close_date: NaiveDate,
    pub direction: Position,
    pub entry_equity: f64,
    pub exit_equity: f64,
    pub provision: f64,
    /// Bars the position was held.
    pub bars: usize,
    /// Continued from an earlier segment without a new opening.
    #[serde(default)]
    pub carried_in: bool,
    /// Still open when the segment ended.
    #[serde(default)]
    pub open_at_end: bool,
}

impl Trade {
    /// Equity change over the trade, provision included.
    pub fn pnl(&self) -> f64 {
        self.exit_equity - self.entry_equity
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TradeLog {
    pub trades: Vec<Trade>,
}

impl TradeLog {
    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    /// Trades opened within the log, i.e. excluding continuations.
    pub fn openings(&self) -> usize {
        self.trades.iter().filter(|t| !t.carried_in).count()
    }

    pub fn provision_sum(&self) -> f64 {
        self.trades.iter().map(|t| t.provision).sum()
    }

    /// Append a later segment's log, joining a trade left open at the end of
    /// `self` with its continuation.
    pub fn append(&mut self, mut next: TradeLog) {
        if let (Some(last), Some(first)) = (self.trades.last_mut(), next.trades.first()) {
            if last.open_at_end && first.carried_in && last.direction == first.direction {
                last.close_date = first.close_date;
                last.exit_equity = first.exit_equity;
                last.provision += first.provision;
                last.bars += first.bars;
                last.open_at_end = first.open_at_end;
                next.trades.remove(0);
            }
        }
        self.trades.extend(next.trades);
    }
}

pub struct MarketEnv<'a> {
    config: EnvConfig,
    segment: Segment<'a>,
    cursor: usize,
    position: Position,
    equity: f64,
    /// Equity committed when the current position was entered, after provision.
    entry_equity: f64,
    entry_price: f64,
    done: bool,
    ruined: bool,
    open_trade: Option<Trade>,
    log: TradeLog,
}

impl<'a> MarketEnv<'a> {
    pub fn new(config: EnvConfig, segment: Segment<'a>) -> Result<Self> {
        config.validate()?;
        if segment.len() <= config.lookback {
            return Err(Error::Data(format!(
                "segment of {} bars is too short for lookback {}",
                segment.len(),
                config.lookback
            )));
        }
        Ok(Self {
            cursor: config.lookback - 1,
            equity: config.initial_capital,
            entry_equity: config.initial_capital,
            entry_price: segment.closes[config.lookback - 1],
            config,
            segment,
            position: Position::Flat,
            done: false,
            ruined: false,
            open_trade: None,
            log: TradeLog::default(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn segment(&self) -> Segment<'a> {
        self.segment
    }

    pub fn equity(&self) -> f64 {
        self.equity
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// A short lost all capital; the episode ended early.
    pub fn is_ruined(&self) -> bool {
        self.ruined
    }

    /// Index of the first decision bar.
    pub fn first_decision(&self) -> usize {
        self.config.lookback - 1
    }

    /// Number of decisions per episode.
    pub fn decision_count(&self) -> usize {
        self.segment.len() - self.config.lookback
    }

    /// Start flat at the initial capital.
    pub fn reset(&mut self) -> Observation {
        self.reset_with(Position::Flat, self.config.initial_capital)
    }

    /// Start holding `position` (already paid for, entered at the first
    /// decision bar's close) with `equity`.
    pub fn reset_with(&mut self, position: Position, equity: f64) -> Observation {
        self.cursor = self.first_decision();
        self.position = position;
        self.equity = equity;
        self.entry_equity = equity;
        self.entry_price = self.segment.closes[self.cursor];
        self.done = false;
        self.ruined = false;
        self.log = TradeLog::default();
        self.open_trade = (position != Position::Flat).then(|| Trade {
            open_date: self.segment.dates[self.cursor],
            close_date: self.segment.dates[self.cursor],
            direction: position,
            entry_equity: equity,
            exit_equity: equity,
            provision: 0.0,
            bars: 0,
            carried_in: true,
            open_at_end: false,
        });
        self.observe(self.cursor)
    }

    fn observe(&self, t: usize) -> Observation {
        let l = self.config.lookback;
        let w = self.segment.width;
        let start = t + 1 - l;
        let data = self.segment.features[start * w..(t + 1) * w].to_vec();
        Observation {
            index: t,
            date: self.segment.dates[t],
            window: Tensor::new(vec![l, w], data).expect("window shape"),
            position: self.position,
        }
    }

    /// Hold `action` from this bar's close to the next. Capital is
    /// reinvested only when the position changes; while a position is held
    /// its equity moves linearly with the price from entry.
    pub fn step(&mut self, action: Position) -> Result<StepResult> {
        if self.done {
            return Err(Error::State("step called after the episode ended".into()));
        }
        let t = self.cursor;
        let date = self.segment.dates[t];
        let opened = self.position.opens(action);
        if action != self.position {
            if let Some(mut trade) = self.open_trade.take() {
                trade.close_date = date;
                trade.exit_equity = self.equity;
                self.log.trades.push(trade);
            }
        }
        let rate = self.config.provision_rate;
        let mut provision = 0.0;
        if opened {
            provision = provision_charge(self.equity, rate);
            self.open_trade = Some(Trade {
                open_date: date,
                close_date: date,
                direction: action,
                entry_equity: self.equity,
                exit_equity: self.equity,
                provision,
                bars: 0,
                carried_in: false,
                open_at_end: false,
            });
            self.equity -= provision;
            self.entry_equity = self.equity;
            self.entry_price = self.segment.closes[t];
        }
        self.position = action;

        let (p0, p1) = (self.segment.closes[t], self.segment.closes[t + 1]);
        let rho = p1 / p0 - 1.0;
        let signed = action.sign() * rho;
        if action != Position::Flat {
            self.equity = self.entry_equity * (1.0 + action.sign() * (p1 / self.entry_price - 1.0));
        }
        let fee = if opened { rate } else { 0.0 };
        let reward = self.config.reward_scale * (signed - fee);

        self.cursor = t + 1;
        self.done = self.cursor == self.segment.len() - 1;
        if self.equity <= 0.0 {
            self.equity = 0.0;
            self.ruined = true;
            self.done = true;
        }
        if let Some(trade) = self.open_trade.as_mut() {
            trade.close_date = self.segment.dates[self.cursor];
            trade.exit_equity = self.equity;
            trade.bars += 1;
        }
        if self.done {
            if let Some(mut trade) = self.open_trade.take() {
                trade.open_at_end = !self.ruined;
                self.log.trades.push(trade);
            }
            if self.ruined {
                self.position = Position::Flat;
            }
        }
        Ok(StepResult {
            observation: self.observe(self.cursor),
            reward,
            done: self.done,
            info: StepInfo {
                equity: self.equity,
                position: action,
                provision,
                index: self.cursor,
                ruined: self.ruined,
            },
        })
    }

    /// Trades closed so far (plus the open one once the episode is done).
    pub fn trade_log(&self) -> &TradeLog {
        &self.log
    }
}

/// Maps an observation to the position to hold over the next bar.
pub trait Policy {
    fn decide(&self, observation: &Observation) -> Result<Position>;
}

impl<F> Policy for F
where
    F: Fn(&Observation) -> Position,
{
    fn decide(&self, observation: &Observation) -> Result<Position> {
        Ok(self(observation))
    }
}

impl Policy for Position {
    fn decide(&self, _: &Observation) -> Result<Position> {
        Ok(*self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Equity at every bar from the first decision bar to the segment end
    /// (or to the bar where a short exhausted the account).
    pub equity: EquityCurve,
    pub trades: TradeLog,
    /// Position held over each step.
    pub positions: Vec<Position>,
    pub rewards: Vec<f64>,
    pub ruined: bool,
}

impl Rollout {
    pub fn final_position(&self) -> Position {
        self.positions.last().copied().unwrap_or(Position::Flat)
    }
}

/// Deterministic evaluation of `policy` over the whole segment, starting flat.
pub fn run_policy<P: Policy + ?Sized>(config: &EnvConfig, policy: &P, segment: Segment<'_>) -> Result<Rollout> {
    run_policy_from(config, policy, segment, Position::Flat, config.initial_capital)
}

/// As [`run_policy`] but starting from a carried position and equity.
pub fn run_policy_from<P: Policy + ?Sized>(
    config: &EnvConfig,
    policy: &P,
    segment: Segment<'_>,
    position: Position,
    equity: f64,
) -> Result<Rollout> {
    let mut env = MarketEnv::new(config.clone(), segment)?;
    let mut obs = env.reset_with(position, equity);
    let first = env.first_decision();
    let mut dates = vec![segment.dates[first]];
    let mut values = vec![equity];
    let mut positions = Vec::with_capacity(env.decision_count());
    let mut rewards = Vec::with_capacity(env.decision_count());
    loop {
        let action = policy.decide(&obs)?;
        let step = env.step(action)?;
        dates.push(segment.dates[step.info.index]);
        values.push(step.info.equity);
        positions.push(action);
        rewards.push(step.reward);
        obs = step.observation;
        if step.done {
            break;
        }
    }
    Ok(Rollout {
        equity: EquityCurve::new(dates, values)?,
        trades: env.log.clone(),
        positions,
        rewards,
        ruined: env.is_ruined(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_indices_round_trip() {
        for p in Position::ALL {
            assert_eq!(Position::from_index(p.index()).unwrap(), p);
        }
        assert!(Position::from_index(3).is_err());
        assert_eq!(Position::Flat.one_hot(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn opening_rules() {
        assert!(Position::Flat.opens(Position::Long));
        assert!(Position::Long.opens(Position::Short));
        assert!(!Position::Long.opens(Position::Long));
        assert!(!Position::Short.opens(Position::Flat));
    }

    #[test]
    fn provision_examples() {
        assert!((provision_charge(10_000.0, 0.0001) - 1.0).abs() < 1e-12);
        assert_eq!(provision_charge(10_000.0, 0.0), 0.0);
        assert!((provision_charge(10_000.0, 0.001) - 10.0).abs() < 1e-12);
    }
}
