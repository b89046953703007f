//! Config files, run artifacts and report merging behind the `drl-trader`
//! binary.
//!
//! A run directory holds:
//!
//! - `manifest.json`: status, resolved config, data checksum, selected
//!   generations
//! - `summary.json` / `summary.csv`: the strategy's row plus both benchmark rows
//! - `windows/window-<k>.json`: generation records, selection and test report
//! - `windows/window-<k>-checkpoint.json`: the selected generation's weights
//! - `equity-<strategy>.csv`: date, equity and drawdown for every strategy
//! - `balance.svg`, `drawdown.svg`

pub mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentConfig;
use crate::benchmarks::{run_benchmark, BenchmarkKind, BenchmarkSpec};
use crate::env::{EnvConfig, Rollout};
use crate::features::{validate_csv_str, Bar, FeatureSpec, ValidationReport};
use crate::metrics::{full_report, Annualization, EquityCurve, PerformanceReport, REPORT_COLUMNS};
use crate::nn::NetworkSpec;
use crate::walkforward::{
    build_schedule, run_walkforward, AssetClass, GenerationRecord, Neighbor, Selection, SelectionPolicy, Span,
    TrainingConfig, WalkForwardConfig, WalkForwardResult, Window, WindowSchedule,
};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Everything a run needs. Omitting `agent` and `network` gives a
/// benchmark-only run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub asset: String,
    /// OHLC CSV; relative paths resolve against the config file's directory.
    pub data: PathBuf,
    pub asset_class: AssetClass,
    /// Defaults to the asset class's anchored start.
    #[serde(default)]
    pub train_start: Option<NaiveDate>,
    pub first_validation_year: i32,
    pub windows: usize,
    #[serde(default)]
    pub features: FeatureSpec,
    pub env: EnvConfig,
    #[serde(default)]
    pub agent: Option<AgentConfig>,
    #[serde(default)]
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub selection: SelectionPolicy,
    /// Defaults to the asset class's bars per year.
    #[serde(default)]
    pub periods_per_year: Option<f64>,
    pub seed: u64,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("invalid run config: {e}")))
    }

    /// Read a config file and resolve its data path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        if config.data.is_relative() {
            if let Some(dir) = path.parent() {
                config.data = dir.join(&config.data);
            }
        }
        Ok(config)
    }

    pub fn annualization(&self) -> Result<Annualization> {
        match self.periods_per_year {
            Some(n) => Annualization::new(n),
            None => Ok(self.asset_class.annualization()),
        }
    }

    pub fn schedule(&self) -> Result<WindowSchedule> {
        let start = self.train_start.unwrap_or_else(|| self.asset_class.train_start());
        build_schedule(start, self.first_validation_year, self.windows).map_err(|e| Error::Config(e.to_string()))
    }

    /// The walk-forward configuration, if this run trains an agent.
    pub fn walkforward(&self) -> Result<Option<WalkForwardConfig>> {
        match (&self.agent, &self.network) {
            (Some(agent), Some(network)) => Ok(Some(WalkForwardConfig {
                features: self.features.clone(),
                env: self.env.clone(),
                agent: agent.clone(),
                network: network.clone(),
                training: self.training,
                selection: self.selection,
                annualization: self.annualization()?,
                seed: self.seed,
            })),
            (None, None) => Ok(None),
            _ => Err(Error::Config("agent and network must be given together".into())),
        }
    }

    /// Label such as `ppo-transformer`, or `benchmarks`.
    pub fn strategy(&self) -> Result<String> {
        Ok(self.walkforward()?.map_or_else(|| "benchmarks".to_string(), |w| w.strategy()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.asset.trim().is_empty() {
            return Err(Error::Config("asset id is empty".into()));
        }
        if !self.data.is_file() {
            return Err(Error::Config(format!("data file {} not found", self.data.display())));
        }
        self.schedule()?;
        self.annualization()?;
        self.env.validate()?;
        self.features.validate()?;
        if let Some(wf) = self.walkforward()? {
            wf.validate()?;
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFingerprint {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub first: NaiveDate,
    pub last: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub index: usize,
    pub seed: u64,
    pub train: Span,
    pub validation: Span,
    pub test: Span,
    pub selected_generation: Option<usize>,
    pub validation_sharpe: Option<f64>,
    pub neighbors: Vec<Neighbor>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub status: RunStatus,
    pub asset: String,
    pub strategy: String,
    pub seed: u64,
    pub periods_per_year: f64,
    pub data: Option<DataFingerprint>,
    pub config: RunConfig,
    pub windows: Vec<WindowSummary>,
    pub files: Vec<String>,
    pub error: Option<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Rows written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub asset: String,
    pub strategy: Option<PerformanceReport>,
    pub benchmarks: Vec<PerformanceReport>,
}

impl RunSummary {
    pub fn rows(&self) -> Vec<&PerformanceReport> {
        self.strategy.iter().chain(&self.benchmarks).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowArtifact {
    pub window: Window,
    pub seed: u64,
    pub records: Vec<GenerationRecord>,
    pub selection: Selection,
    pub report: PerformanceReport,
}

/// Classify an error for the process exit status: 3 config, 4 data,
/// 5 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) => 3,
        Error::Data(_) | Error::Csv(_) | Error::Schedule(_) => 4,
        _ => 5,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Check a data file without modifying it.
pub fn cmd_validate(path: &Path) -> Result<ValidationReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(validate_csv_str(&text))
}

fn load_bars(path: &Path) -> Result<(Vec<Bar>, DataFingerprint)> {
    let bytes = fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Data(format!("{} is not UTF-8", path.display())))?;
    let report = validate_csv_str(&text);
    if !report.is_valid() {
        let shown: Vec<String> = report
            .violations
            .iter()
            .take(5)
            .map(|v| format!("line {}: {}", v.line, v.message))
            .collect();
        return Err(Error::Data(format!(
            "{} has {} violation(s): {}",
            path.display(),
            report.violations.len(),
            shown.join("; ")
        )));
    }
    let bars = report.bars;
    let (first, last) = match (bars.first(), bars.last()) {
        (Some(a), Some(b)) => (a.date, b.date),
        _ => return Err(Error::Data(format!("{} holds no bars", path.display()))),
    };
    let fingerprint = DataFingerprint {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        rows: bars.len(),
        first,
        last,
    };
    Ok((bars, fingerprint))
}

/// Rows from the first bar of the test span through the first bar after it
/// (or the last bar).
fn test_rows(bars: &[Bar], span: Span) -> Result<(usize, usize)> {
    let start = bars.partition_point(|b| b.date < span.start);
    let after = bars.partition_point(|b| b.date <= span.end);
    let end = after.min(bars.len() - 1);
    if end <= start {
        return Err(Error::Data(format!("no bars inside the test span {span}")));
    }
    Ok((start, end))
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(name.to_string());
    Ok(())
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(manifest)? + "\n").map_err(|e| Error::io(&path, e))
}

/// What a finished run wrote.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub summary: RunSummary,
}

struct Outputs {
    summary: RunSummary,
    windows: Vec<WindowSummary>,
    files: Vec<String>,
}

/// Execute a config: walk-forward (when an agent is configured) plus both
/// benchmarks over the same test span, writing every artifact into the
/// output directory. The manifest is marked `failed` if anything goes wrong
/// after the directory is created.
pub fn cmd_run(config_path: &Path, overrides: &RunOverrides) -> Result<RunOutcome> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(out) = &overrides.out {
        config.output = out.clone();
    }
    config.validate()?;
    let out = config.output.clone();
    fs::create_dir_all(out.join("windows")).map_err(|e| Error::io(&out, e))?;

    let mut manifest = Manifest {
        format_version: FORMAT_VERSION,
        status: RunStatus::Running,
        asset: config.asset.clone(),
        strategy: config.strategy()?,
        seed: config.seed,
        periods_per_year: config.annualization()?.periods_per_year,
        data: None,
        config: config.clone(),
        windows: Vec::new(),
        files: Vec::new(),
        error: None,
    };
    write_manifest(&out, &manifest)?;

    let result = (|| -> Result<Outputs> {
        let (bars, fingerprint) = load_bars(&config.data)?;
        manifest.data = Some(fingerprint);
        write_manifest(&out, &manifest)?;
        execute(&config, &bars, &out, overrides.jobs)
    })();
    match result {
        Ok(outputs) => {
            manifest.status = RunStatus::Complete;
            manifest.windows = outputs.windows;
            manifest.files = outputs.files;
            write_manifest(&out, &manifest)?;
            info!("run complete: {}", out.display());
            Ok(RunOutcome {
                dir: out,
                manifest,
                summary: outputs.summary,
            })
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            write_manifest(&out, &manifest)?;
            Err(e)
        }
    }
}

fn run_parallel(config: &WalkForwardConfig, bars: &[Bar], schedule: &WindowSchedule, jobs: Option<usize>) -> Result<WalkForwardResult> {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(|| run_walkforward(bars, schedule, config)),
        None => run_walkforward(bars, schedule, config),
    }
}

fn execute(config: &RunConfig, bars: &[Bar], out: &Path, jobs: Option<usize>) -> Result<Outputs> {
    let schedule = config.schedule()?;
    schedule.check_coverage(bars[0].date, bars[bars.len() - 1].date)?;
    let annualization = config.annualization()?;
    let mut files = Vec::new();
    let mut curves: Vec<(String, EquityCurve)> = Vec::new();

    let mut strategy = None;
    let mut windows = Vec::new();
    if let Some(wf) = config.walkforward()? {
        let result = run_parallel(&wf, bars, &schedule, jobs)?;
        for w in &result.windows {
            let seed = wf.seed.wrapping_add(w.window.index as u64);
            let k = w.window.index + 1;
            let artifact = WindowArtifact {
                window: w.window,
                seed,
                records: w.records.clone(),
                selection: w.selection.clone(),
                report: w.report.clone(),
            };
            write(out, &format!("windows/window-{k}.json"), &(serde_json::to_string_pretty(&artifact)? + "\n"), &mut files)?;
            write(out, &format!("windows/window-{k}-checkpoint.json"), &w.checkpoint.to_json()?, &mut files)?;
            windows.push(WindowSummary {
                index: w.window.index,
                seed,
                train: w.window.train,
                validation: w.window.validation,
                test: w.window.test,
                selected_generation: Some(w.selection.chosen.generation),
                validation_sharpe: w.selection.chosen.validation_sharpe,
                neighbors: w.selection.neighbors.clone(),
                warning: w.selection.warning.clone(),
            });
        }
        write(out, "report.json", &(result.report.to_json()? + "\n"), &mut files)?;
        curves.push((result.strategy.clone(), result.equity.clone()));
        strategy = Some(result.report);
    }

    let (start, end) = test_rows(bars, schedule.test_span())?;
    let dates: Vec<NaiveDate> = bars[start..=end].iter().map(|b| b.date).collect();
    let closes: Vec<f64> = bars[start..=end].iter().map(|b| b.close).collect();
    let mut benchmarks = Vec::new();
    for kind in [BenchmarkKind::BuyAndHold, BenchmarkKind::PerfectAnnual] {
        let spec = BenchmarkSpec {
            kind,
            provision_rate: config.env.provision_rate,
            initial_capital: config.env.initial_capital,
        };
        let Rollout {
            equity,
            trades,
            positions,
            ..
        } = run_benchmark(&dates, &closes, &spec)?;
        let report = full_report(kind.label(), &equity, &trades, &positions, annualization, equity.span_years())?;
        benchmarks.push(report);
        curves.push((kind.label().to_string(), equity));
    }

    let summary = RunSummary {
        asset: config.asset.clone(),
        strategy,
        benchmarks,
    };
    let rows: Vec<PerformanceReport> = summary.rows().into_iter().cloned().collect();
    write(out, "summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"), &mut files)?;
    write(out, "summary.csv", &crate::metrics::reports_to_csv(&rows), &mut files)?;
    for (label, curve) in &curves {
        write(out, &format!("equity-{label}.csv"), &curve.to_csv(), &mut files)?;
    }
    let drawdowns: Vec<Vec<f64>> = curves.iter().map(|(_, c)| c.drawdowns()).collect();
    let balance = plot::line_chart(
        &format!("{}: balance", config.asset),
        &curves
            .iter()
            .map(|(l, c)| plot::Series {
                label: l,
                dates: c.dates(),
                values: c.values(),
            })
            .collect::<Vec<_>>(),
        false,
    );
    let drawdown = plot::line_chart(
        &format!("{}: drawdown", config.asset),
        &curves
            .iter()
            .zip(&drawdowns)
            .map(|((l, c), d)| plot::Series {
                label: l,
                dates: c.dates(),
                values: d,
            })
            .collect::<Vec<_>>(),
        true,
    );
    write(out, "balance.svg", &balance, &mut files)?;
    write(out, "drawdown.svg", &drawdown, &mut files)?;
    Ok(Outputs {
        summary,
        windows,
        files,
    })
}

/// A run directory that could not contribute rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingRun {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub asset: String,
    #[serde(flatten)]
    pub report: PerformanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub missing: Vec<MissingRun>,
}

impl Comparison {
    /// CSV with an asset column followed by the report columns.
    pub fn to_csv(&self) -> String {
        let mut out = format!("asset,{}\n", REPORT_COLUMNS.join(","));
        for row in &self.rows {
            out.push_str(&format!("{},{}\n", row.asset, row.report.csv_row()));
        }
        out
    }
}

fn run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    if root.join("manifest.json").is_file() {
        dirs.push(root.to_path_buf());
    }
    let entries = fs::read_dir(root).map_err(|e| Error::Data(format!("cannot read {}: {e}", root.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join("manifest.json").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Merge every completed run under `root` into one table: per asset, the
/// agent rows in directory order followed by the two benchmark rows.
/// Incomplete runs are listed as missing. Writes `comparison.csv` and
/// `comparison.json` into `out` (default `root`).
pub fn cmd_report(root: &Path, out: Option<&Path>) -> Result<Comparison> {
    let dirs = run_dirs(root)?;
    if dirs.is_empty() {
        return Err(Error::Data(format!("no runs found in {}", root.display())));
    }
    let mut missing = Vec::new();
    let mut agents: BTreeMap<String, Vec<PerformanceReport>> = BTreeMap::new();
    let mut benchmarks: BTreeMap<String, Vec<PerformanceReport>> = BTreeMap::new();
    for dir in &dirs {
        let manifest = Manifest::load(&dir.join("manifest.json"))?;
        let summary_path = dir.join("summary.json");
        if manifest.status != RunStatus::Complete || !summary_path.is_file() {
            missing.push(MissingRun {
                path: dir.display().to_string(),
                reason: manifest.error.unwrap_or_else(|| format!("run status is {:?}", manifest.status)),
            });
            continue;
        }
        let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        let summary: RunSummary = serde_json::from_str(&text)?;
        if let Some(r) = summary.strategy {
            agents.entry(summary.asset.clone()).or_default().push(r);
        }
        benchmarks.entry(summary.asset).or_insert(summary.benchmarks);
    }
    if benchmarks.is_empty() {
        return Err(Error::Data(format!(
            "no completed runs found in {} ({} incomplete)",
            root.display(),
            missing.len()
        )));
    }
    let mut rows = Vec::new();
    for (asset, bench) in benchmarks {
        for report in agents.remove(&asset).unwrap_or_default().into_iter().chain(bench) {
            rows.push(ComparisonRow {
                asset: asset.clone(),
                report,
            });
        }
    }
    let comparison = Comparison { rows, missing };
    let dest = out.unwrap_or(root);
    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let csv_path = dest.join("comparison.csv");
    fs::write(&csv_path, comparison.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dest.join("comparison.json");
    fs::write(&json_path, serde_json::to_string_pretty(&comparison)? + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(comparison)
}
