use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use drl_trader::app::{cmd_report, cmd_run, cmd_validate, exit_code, RunOverrides};

/// Train and evaluate DRL trading agents under a walk-forward schedule.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an OHLC CSV file and list every violation.
    Validate {
        /// CSV with a `timestamp,open,high,low,close` header.
        data: PathBuf,
    },
    /// Execute a run config and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for parallel windows.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Merge completed runs under a directory into one comparison table.
    Report {
        dir: PathBuf,
        /// Where to write comparison.csv and comparison.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { data } => {
            let report = cmd_validate(&data)?;
            for v in &report.violations {
                println!("line {}: {}", v.line, v.message);
            }
            println!("{} rows, {} violation(s)", report.rows, report.violations.len());
            Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(4) })
        }
        Command::Run { config, seed, out, jobs } => {
            let outcome = cmd_run(&config, &RunOverrides { seed, out, jobs })?;
            for row in outcome.summary.rows() {
                println!(
                    "{:<16} final {:>12.2}  cagr {:>8.2}%  sharpe {}",
                    row.strategy,
                    row.final_balance,
                    row.cagr * 100.0,
                    row.sharpe.map_or("NA".into(), |s| format!("{s:.3}"))
                );
            }
            println!("artifacts in {}", outcome.dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir, out } => {
            let table = cmd_report(&dir, out.as_deref())?;
            print!("{}", table.to_csv());
            for m in &table.missing {
                eprintln!("missing run {}: {}", m.path, m.reason);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<drl_trader::Error>().map_or(5, exit_code);
            ExitCode::from(code as u8)
        }
    }
}
