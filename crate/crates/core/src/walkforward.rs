//! Anchored walk-forward evaluation.
//!
//! Every window trains on a span that starts at a fixed date and ends the
//! year before validation, validates for one year and tests on the year
//! after. Each window trains a fresh agent by cycling over random one-year
//! slices of its training span, checkpoints a generation per cycle, picks a
//! generation by validation Sharpe, and trades the test year with it. Test
//! years are chained so capital and the open position carry across windows.

use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDate};
use log::{debug, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentCheckpoint, AgentConfig, AgentKind};
use crate::env::{run_policy, run_policy_from, EnvConfig, MarketEnv, Observation, Policy, Position, Rollout, Segment};
use crate::features::{build_features, Bar, FeatureFrame, FeatureSpec, Scaler};
use crate::metrics::{full_report, sharpe, Annualization, EquityCurve, PerformanceReport};
use crate::nn::{Architecture, Mode, NetworkSpec};
use crate::rl::Transition;
use crate::{seeded, Error, Result};

/// How far inside the schedule's first and last day the data may start and
/// end (holidays and weekends at the edges).
pub const COVERAGE_TOLERANCE_DAYS: i64 = 14;

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Span {
    pub fn year(year: i32) -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year"),
            end: NaiveDate::from_ymd_opt(year, 12, 31).expect("valid year"),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        (self.start..=self.end).contains(&date)
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..={}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    /// Zero-based position in the schedule.
    pub index: usize,
    pub train: Span,
    pub validation: Span,
    pub test: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSchedule {
    pub windows: Vec<Window>,
}

/// Where training data starts for each asset class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetClass {
    Fx,
    Equities,
    Crypto,
}

impl AssetClass {
    pub fn train_start(self) -> NaiveDate {
        match self {
            AssetClass::Fx | AssetClass::Equities => NaiveDate::from_ymd_opt(2005, 1, 1),
            AssetClass::Crypto => NaiveDate::from_ymd_opt(2013, 1, 1),
        }
        .expect("valid date")
    }

    pub fn annualization(self) -> Annualization {
        match self {
            AssetClass::Fx => Annualization::FX,
            AssetClass::Equities => Annualization::EQUITIES,
            AssetClass::Crypto => Annualization::CRYPTO,
        }
    }
}

/// Anchored windows: window `k` trains from `train_start` to the end of
/// year `v+k−1`, validates on `v+k` and tests on `v+k+1`.
pub fn build_schedule(train_start: NaiveDate, first_validation_year: i32, windows: usize) -> Result<WindowSchedule> {
    if windows == 0 {
        return Err(Error::Schedule("a schedule needs at least one window".into()));
    }
    if train_start.year() >= first_validation_year {
        return Err(Error::Schedule(format!(
            "training starting {train_start} leaves no data before validation year {first_validation_year}"
        )));
    }
    let windows = (0..windows)
        .map(|k| {
            let v = first_validation_year + k as i32;
            Window {
                index: k,
                train: Span {
                    start: train_start,
                    end: NaiveDate::from_ymd_opt(v - 1, 12, 31).expect("valid year"),
                },
                validation: Span::year(v),
                test: Span::year(v + 1),
            }
        })
        .collect();
    Ok(WindowSchedule { windows })
}

impl WindowSchedule {
    /// Full span from the anchored train start to the last test day.
    pub fn span(&self) -> Span {
        Span {
            start: self.windows[0].train.start,
            end: self.windows.last().expect("non-empty").test.end,
        }
    }

    /// All test years as one span.
    pub fn test_span(&self) -> Span {
        Span {
            start: self.windows[0].test.start,
            end: self.windows.last().expect("non-empty").test.end,
        }
    }

    /// Fails with the uncovered spans when data dated `first..=last` does not
    /// reach the schedule's ends.
    pub fn check_coverage(&self, first: NaiveDate, last: NaiveDate) -> Result<()> {
        let need = self.span();
        let slack = Duration::days(COVERAGE_TOLERANCE_DAYS);
        let mut missing = Vec::new();
        if first > need.start + slack {
            missing.push(format!("{}..={}", need.start, first.pred_opt().unwrap_or(first)));
        }
        if last < need.end - slack {
            missing.push(format!("{}..={}", last.succ_opt().unwrap_or(last), need.end));
        }
        if missing.is_empty() {
            return Ok(());
        }
        Err(Error::Schedule(format!(
            "data covers {first}..={last} but the schedule needs {need}; missing {}",
            missing.join(" and ")
        )))
    }
}

/// Subset-cycling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Training cycles (generations) per window.
    pub cycles: usize,
    /// Calendar length of each random training slice.
    pub slice_days: i64,
    /// Share of all training steps over which DDQN's ε decays.
    pub exploration_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            cycles: 40,
            slice_days: 365,
            exploration_fraction: 0.5,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slice_days < 2 {
            return Err(Error::Config(format!("slice of {} days is too short", self.slice_days)));
        }
        if !(0.0..=1.0).contains(&self.exploration_fraction) {
            return Err(Error::Config("exploration fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Metric used to rank generations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMetric {
    Sharpe,
    FinalBalance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionPolicy {
    /// Only generations with index ≥ this fraction of the last index compete.
    pub min_fraction: f64,
    /// Neighbors reported on each side of the winner.
    pub radius: usize,
    pub metric: RankingMetric,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            min_fraction: 0.5,
            radius: 2,
            metric: RankingMetric::Sharpe,
        }
    }
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_fraction > 0.0 && self.min_fraction <= 1.0) {
            return Err(Error::Config(format!("min fraction {} outside (0, 1]", self.min_fraction)));
        }
        Ok(())
    }
}

/// One training cycle's checkpoint scored on the validation year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// `None` when returns have zero variance (e.g. the policy stayed flat).
    pub validation_sharpe: Option<f64>,
    pub validation_final_balance: f64,
}

impl GenerationRecord {
    fn score(&self, metric: RankingMetric) -> f64 {
        match metric {
            RankingMetric::Sharpe => self.validation_sharpe.unwrap_or(f64::NEG_INFINITY),
            RankingMetric::FinalBalance => self.validation_final_balance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub generation: usize,
    /// `None` when that generation does not exist.
    pub record: Option<GenerationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: GenerationRecord,
    /// Generations `chosen ± 1 … ± radius`, in index order.
    pub neighbors: Vec<Neighbor>,
    pub warning: Option<String>,
}

/// Best eligible generation (ties go to the lower index) plus its
/// neighborhood. A warning is attached when the winner's Sharpe is more than
/// twice that of each adjacent generation.
pub fn select_generation(records: &[GenerationRecord], policy: &SelectionPolicy) -> Result<Selection> {
    policy.validate()?;
    let max = records
        .iter()
        .map(|r| r.generation)
        .max()
        .ok_or_else(|| Error::Selection("no generations were recorded".into()))?;
    let threshold = policy.min_fraction * max as f64;
    let mut chosen: Option<&GenerationRecord> = None;
    for r in records.iter().filter(|r| r.generation as f64 >= threshold) {
        let better = match chosen {
            None => true,
            Some(c) => {
                let (a, b) = (r.score(policy.metric), c.score(policy.metric));
                a > b || (a == b && r.generation < c.generation)
            }
        };
        if better {
            chosen = Some(r);
        }
    }
    let chosen = *chosen.ok_or_else(|| Error::Selection(format!("no generation reaches index {threshold}")))?;
    let find = |g: usize| records.iter().find(|r| r.generation == g).copied();
    let g = chosen.generation;
    let neighbors: Vec<Neighbor> = (g.saturating_sub(policy.radius)..=g + policy.radius)
        .filter(|&n| n != g)
        .map(|n| Neighbor {
            generation: n,
            record: find(n),
        })
        .collect();
    let warning = chosen.validation_sharpe.and_then(|s| {
        let adjacent: Vec<GenerationRecord> = [g.checked_sub(1), Some(g + 1)]
            .into_iter()
            .flatten()
            .filter_map(find)
            .collect();
        let outlier = s > 0.0
            && !adjacent.is_empty()
            && adjacent
                .iter()
                .all(|r| r.validation_sharpe.is_none_or(|n| s > 2.0 * n));
        outlier.then(|| format!("generation {g} (Sharpe {s:.3}) exceeds its adjacent generations by more than 2x"))
    });
    Ok(Selection {
        chosen,
        neighbors,
        warning,
    })
}

/// Everything the walk-forward needs besides data and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkForwardConfig {
    pub features: FeatureSpec,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub network: NetworkSpec,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub selection: SelectionPolicy,
    pub annualization: Annualization,
    pub seed: u64,
}

impl WalkForwardConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.env.validate()?;
        self.training.validate()?;
        self.selection.validate()?;
        Annualization::new(self.annualization.periods_per_year)?;
        if let AgentConfig::Ppo(p) = &self.agent {
            p.validate()?;
        }
        Ok(())
    }

    /// Strategy label such as `ppo-transformer`.
    pub fn strategy(&self) -> String {
        strategy_label(self.agent.kind(), self.network.architecture())
    }
}

pub fn strategy_label(agent: AgentKind, architecture: Architecture) -> String {
    let net = match architecture {
        Architecture::Dense => "dense",
        Architecture::Transformer => "transformer",
    };
    format!("{agent}-{net}")
}

/// A window's standardized features and the row ranges of its three
/// segments. Validation and test ranges start `lookback − 1` rows early so
/// their first decision falls on the span's first bar.
#[derive(Debug, Clone)]
pub struct WindowData {
    pub window: Window,
    pub scaler: Scaler,
    pub frame: FeatureFrame,
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl WindowData {
    fn segment(&self, rows: &Range<usize>) -> Segment<'_> {
        let w = self.frame.width();
        Segment::new(
            &self.frame.dates[rows.clone()],
            &self.frame.closes[rows.clone()],
            &self.frame.values[rows.start * w..rows.end * w],
            w,
        )
        .expect("rows lie inside the frame")
    }

    pub fn train_segment(&self) -> Segment<'_> {
        self.segment(&self.train)
    }

    pub fn validation_segment(&self) -> Segment<'_> {
        self.segment(&self.validation)
    }

    /// Test year plus the next year's first bar, where the last decision
    /// settles (absent for the final year of data).
    pub fn test_segment(&self) -> Segment<'_> {
        self.segment(&self.test)
    }
}

/// Fit the scaler on the training span only and slice the three segments.
/// Fails if any training or scaling row falls inside validation or test.
pub fn prepare_window(raw: &FeatureFrame, window: &Window, lookback: usize) -> Result<WindowData> {
    let scaler = Scaler::fit(raw, window.train.start, window.train.end)?;
    if window.validation.contains(scaler.fit_end) || scaler.fit_end >= window.validation.start {
        return Err(Error::Schedule(format!("scaler for window {} saw {}", window.index + 1, scaler.fit_end)));
    }
    let frame = scaler.transform(raw)?;
    let train_start = frame.index_at_or_after(window.train.start);
    let val_start = frame.index_at_or_after(window.validation.start);
    let test_start = frame.index_at_or_after(window.test.start);
    let after_test = frame.index_at_or_after(window.test.end + Duration::days(1));
    let short = |what: &str, span: Span, rows: usize| {
        Error::Schedule(format!(
            "window {} {what} span {span} has {rows} usable rows; lookback {lookback} needs more",
            window.index + 1
        ))
    };
    if val_start < train_start + lookback + 1 {
        return Err(short("train", window.train, val_start - train_start));
    }
    if test_start < val_start + 2 || val_start + 1 < lookback {
        return Err(short("validation", window.validation, test_start - val_start));
    }
    if after_test < test_start + 1 {
        return Err(short("test", window.test, after_test - test_start));
    }
    let data = WindowData {
        window: *window,
        train: train_start..val_start,
        validation: val_start + 1 - lookback..test_start,
        test: test_start + 1 - lookback..(after_test + 1).min(frame.len()),
        scaler,
        frame,
    };
    let last_train = data.frame.dates[data.train.end - 1];
    let last_validation = data.frame.dates[data.validation.end - 1];
    if last_train > window.train.end || last_validation >= window.test.start {
        return Err(Error::Schedule(format!("window {} segments overlap", window.index + 1)));
    }
    Ok(data)
}

/// Generations recorded while training one window, with their checkpoints
/// (`checkpoints[g]` belongs to generation `g`).
#[derive(Debug, Clone)]
pub struct TrainedWindow {
    pub records: Vec<GenerationRecord>,
    pub checkpoints: Vec<AgentCheckpoint>,
}

/// Random contiguous slice of `rows` spanning at most `days` calendar days,
/// long enough for at least one decision.
fn sample_slice(dates: &[NaiveDate], rows: &Range<usize>, days: i64, lookback: usize, rng: &mut crate::SeedRng) -> Range<usize> {
    let span = &dates[rows.clone()];
    let end_of = |s: usize| s + span[s..].partition_point(|d| *d < span[s] + Duration::days(days));
    let last_start = (0..span.len())
        .rev()
        .find(|&s| span[s] + Duration::days(days) <= span[span.len() - 1])
        .unwrap_or(0);
    let mut s = rng.random_range(0..=last_start);
    let mut e = end_of(s).max(s + lookback + 1).min(span.len());
    if e - s < lookback + 1 {
        s = span.len() - (lookback + 1);
        e = span.len();
    }
    rows.start + s..rows.start + e
}

fn network_input(spec: &NetworkSpec, lookback: usize, features: usize) -> (usize, usize) {
    let arch = spec.architecture();
    let width = Observation::encoded_width(arch, lookback, features);
    match arch {
        Architecture::Dense => (width, 1),
        Architecture::Transformer => (width, lookback),
    }
}

/// Train a fresh agent on one window, scoring a checkpoint per cycle on the
/// validation year.
pub fn train_window(data: &WindowData, config: &WalkForwardConfig, seed: u64) -> Result<TrainedWindow> {
    let mut rng = seeded(seed);
    let lookback = config.env.lookback;
    let arch = config.network.architecture();
    let (input, seq) = network_input(&config.network, lookback, data.frame.width());
    let net = config.network.resolve(input, seq, Position::ALL.len());
    let mut agent = config.agent.build(&net, &mut rng)?;

    let dates = &data.frame.dates[data.train.clone()];
    let train_days = (dates[dates.len() - 1] - dates[0]).num_days().max(1) as f64;
    let bars_per_slice = (dates.len() as f64 * config.training.slice_days as f64 / train_days).min(dates.len() as f64);
    let total_steps = config.training.cycles as f64 * (bars_per_slice - lookback as f64).max(1.0);
    agent.set_exploration_steps((total_steps * config.training.exploration_fraction) as u64);

    let validation = data.validation_segment();
    let mut records = Vec::with_capacity(config.training.cycles);
    let mut checkpoints = Vec::with_capacity(config.training.cycles);
    for generation in 0..config.training.cycles {
        let rows = sample_slice(&data.frame.dates, &data.train, config.training.slice_days, lookback, &mut rng);
        let segment = data.segment(&rows);
        let mut env = MarketEnv::new(config.env.clone(), segment)?;
        let mut state = env.reset().encode(arch);
        loop {
            let action = agent.act(&state, Mode::Train, &mut rng)?;
            let step = env.step(Position::from_index(action)?)?;
            let next = step.observation.encode(arch);
            agent.observe(
                Transition {
                    state,
                    action,
                    reward: step.reward,
                    next_state: next.clone(),
                    // running out of slice is a truncation, not a terminal state
                    terminal: step.info.ruined,
                },
                &mut rng,
            )?;
            state = next;
            if step.done {
                break;
            }
        }
        agent.end_cycle(&mut rng)?;

        let checkpoint = agent.checkpoint(generation);
        let out = run_policy(&config.env, &checkpoint.policy()?, validation)?;
        let record = GenerationRecord {
            generation,
            validation_sharpe: sharpe(&out.equity.returns(), config.annualization),
            validation_final_balance: out.equity.last(),
        };
        debug!(
            "window {} generation {generation}: validation sharpe {:?}, balance {:.2}",
            data.window.index + 1,
            record.validation_sharpe,
            record.validation_final_balance
        );
        records.push(record);
        checkpoints.push(checkpoint);
    }
    Ok(TrainedWindow { records, checkpoints })
}

/// Trade each segment with its policy, carrying equity and the open
/// position from one segment into the next. Stops early if capital is
/// exhausted.
pub fn run_test_chain<P: Policy>(config: &EnvConfig, segments: &[Segment<'_>], policies: &[P]) -> Result<Vec<Rollout>> {
    if segments.len() != policies.len() {
        return Err(Error::Config(format!("{} segments but {} policies", segments.len(), policies.len())));
    }
    let mut out: Vec<Rollout> = Vec::with_capacity(segments.len());
    let (mut position, mut equity) = (Position::Flat, config.initial_capital);
    for (segment, policy) in segments.iter().zip(policies) {
        let rollout = run_policy_from(config, policy, *segment, position, equity)?;
        position = rollout.final_position();
        equity = rollout.equity.last();
        let ruined = rollout.ruined;
        out.push(rollout);
        if ruined {
            warn!("capital exhausted; later test segments are skipped");
            break;
        }
    }
    Ok(out)
}

/// One continuous curve, trade log and position history from chained
/// rollouts.
pub fn stitch(rollouts: &[Rollout]) -> Result<(EquityCurve, crate::env::TradeLog, Vec<Position>)> {
    let first = rollouts.first().ok_or_else(|| Error::State("nothing to stitch".into()))?;
    let mut curve = first.equity.clone();
    let mut trades = first.trades.clone();
    let mut positions = first.positions.clone();
    for r in &rollouts[1..] {
        curve.append(&r.equity)?;
        trades.append(r.trades.clone());
        positions.extend_from_slice(&r.positions);
    }
    Ok((curve, trades, positions))
}

#[derive(Debug, Clone)]
pub struct WindowResult {
    pub window: Window,
    pub records: Vec<GenerationRecord>,
    pub selection: Selection,
    pub checkpoint: AgentCheckpoint,
    pub test: Rollout,
    pub report: PerformanceReport,
}

impl WindowResult {
    pub fn start_equity(&self) -> f64 {
        self.test.equity.initial()
    }

    pub fn end_equity(&self) -> f64 {
        self.test.equity.last()
    }
}

#[derive(Debug, Clone)]
pub struct WalkForwardResult {
    pub strategy: String,
    /// Windows whose test year was traded (all of them unless capital ran out).
    pub windows: Vec<WindowResult>,
    pub equity: EquityCurve,
    pub trades: crate::env::TradeLog,
    pub positions: Vec<Position>,
    pub report: PerformanceReport,
}

/// Train every window (in parallel, window `k` seeded with `seed + k`),
/// select a generation per window, and trade the chained test years.
pub fn run_walkforward(bars: &[Bar], schedule: &WindowSchedule, config: &WalkForwardConfig) -> Result<WalkForwardResult> {
    config.validate()?;
    let (first, last) = match (bars.first(), bars.last()) {
        (Some(a), Some(b)) => (a.date, b.date),
        _ => return Err(Error::Data("no bars".into())),
    };
    schedule.check_coverage(first, last)?;
    let raw = build_features(bars, &config.features)?;
    let prepared = schedule
        .windows
        .iter()
        .map(|w| prepare_window(&raw, w, config.env.lookback))
        .collect::<Result<Vec<_>>>()?;

    let trained = prepared
        .par_iter()
        .map(|d| train_window(d, config, config.seed.wrapping_add(d.window.index as u64)))
        .collect::<Result<Vec<_>>>()?;

    let mut selections = Vec::with_capacity(trained.len());
    let mut policies = Vec::with_capacity(trained.len());
    for (d, t) in prepared.iter().zip(&trained) {
        let selection = select_generation(&t.records, &config.selection)?;
        if let Some(w) = &selection.warning {
            warn!("window {}: {w}", d.window.index + 1);
        }
        policies.push(t.checkpoints[selection.chosen.generation].policy()?);
        selections.push(selection);
    }
    let segments: Vec<Segment<'_>> = prepared.iter().map(WindowData::test_segment).collect();
    let rollouts = run_test_chain(&config.env, &segments, &policies)?;

    let strategy = config.strategy();
    let mut windows = Vec::with_capacity(rollouts.len());
    for (((d, t), selection), test) in prepared.iter().zip(trained).zip(selections).zip(rollouts.iter().cloned()) {
        let report = full_report(
            &strategy,
            &test.equity,
            &test.trades,
            &test.positions,
            config.annualization,
            test.equity.span_years(),
        )?;
        windows.push(WindowResult {
            window: d.window,
            checkpoint: t.checkpoints[selection.chosen.generation].clone(),
            records: t.records,
            selection,
            test,
            report,
        });
    }
    let (equity, trades, positions) = stitch(&rollouts)?;
    let report = full_report(&strategy, &equity, &trades, &positions, config.annualization, equity.span_years())?;
    Ok(WalkForwardResult {
        strategy,
        windows,
        equity,
        trades,
        positions,
        report,
    })
}
