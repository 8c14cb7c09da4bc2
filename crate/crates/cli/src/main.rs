//! Command-line driver: sampling jobs, convergence studies, significance
//! tests, mining, synthetic generation, and step-time benchmarks.
//!
//! Exit codes: 0 success, 2 validation error, 3 I/O error, 4 internal
//! invariant violation.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bjdm_core::Error as CoreError;
use config::{Command, Format, JobConfig};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Invariant(String),
}

impl CliError {
    fn validation(msg: &str) -> Self {
        CliError::Validation(msg.to_string())
    }

    fn io(path: &dyn fmt::Display, err: std::io::Error) -> Self {
        CliError::Io(format!("{path}: {err}"))
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Io(_) => ExitCode::from(3),
            CliError::Invariant(_) => ExitCode::from(4),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Invariant(m) => write!(f, "invariant: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvariantViolation { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Null-model sampling and resampling-based significance testing for
/// transactional and sequence datasets.
#[derive(Parser)]
#[command(name = "bjdm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Input dataset file (repeatable for bench).
    #[arg(long = "input")]
    inputs: Vec<String>,
    /// Dataset format: trans | seq.
    #[arg(long, default_value = "trans")]
    format: String,
    /// Sampler: alice-a | alice-b | alice-s | gmmt | gmmt-s | selfloop
    /// (comma-separated list for convergence and bench).
    #[arg(long = "algo")]
    algos: Vec<String>,
    /// Absolute number of chain steps (mutually exclusive with --k).
    #[arg(long)]
    swaps: Option<u64>,
    /// Steps as a multiple of the chain weight w (mutually exclusive with
    /// --swaps). Defaults per sampler.
    #[arg(long)]
    k: Option<f64>,
    /// Number of sampled datasets.
    #[arg(long)]
    samples: Option<usize>,
    /// Minimum support: a fraction in (0, 1] or an integer count.
    #[arg(long)]
    theta: Option<f64>,
    /// Random seed; all chain seeds derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). BJDM_SAMPLER_THREADS overrides.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Output file (or directory for sample). Defaults to stdout.
    #[arg(long)]
    out: Option<String>,
    /// Verify degree and joint-degree invariants after every accepted step.
    #[arg(long, default_value_t = false)]
    check_invariants: bool,
    /// Tail that counts as more extreme: greater | less.
    #[arg(long)]
    direction: Option<String>,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Draw datasets from the null model and write them with a manifest.
    Sample(CommonArgs),
    /// ARSD trace over the step-multiplier grid, one chain per sampler.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated k grid (default: 0,0.15,...,1.95,2,3,...,6).
        #[arg(long)]
        k_grid: Option<String>,
    },
    /// Empirical p-value of the frequent-pattern count plus per-length means.
    Significance(CommonArgs),
    /// Mine frequent itemsets (trans) or sequential patterns (seq).
    Mine(CommonArgs),
    /// Generate a synthetic dataset.
    Gen {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of transactions (or sequences).
        #[arg(long)]
        transactions: usize,
        /// Alphabet size.
        #[arg(long)]
        items: usize,
        /// Mean transaction (sequence) length.
        #[arg(long)]
        avg_length: f64,
    },
    /// Per-step latency distribution per sampler and dataset.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Steps to time per chain.
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
    },
    /// Execute a JSON job configuration.
    Run {
        /// Path to a JobConfig JSON file.
        #[arg(long)]
        config: String,
    },
}

fn lower(command: Command, common: &CommonArgs) -> Result<JobConfig, CliError> {
    let format = Format::parse(&common.format).map_err(CliError::Validation)?;
    let samplers: Vec<String> = common
        .algos
        .iter()
        .flat_map(|s| s.split(','))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    Ok(JobConfig {
        command,
        inputs: common.inputs.clone(),
        format,
        samplers,
        num_swaps: common.swaps,
        k_multiplier: common.k,
        num_samples: common.samples,
        theta: common.theta,
        seed: common.seed,
        parallelism: common.parallelism,
        out: common.out.clone(),
        check_invariants: common.check_invariants,
        direction: common.direction.clone(),
        k_grid: None,
        steps: None,
        gen_transactions: None,
        gen_items: None,
        gen_avg_length: None,
    })
}

fn build_config(command: CliCommand) -> Result<JobConfig, CliError> {
    match command {
        CliCommand::Sample(common) => lower(Command::Sample, &common),
        CliCommand::Convergence { common, k_grid } => {
            let mut config = lower(Command::Convergence, &common)?;
            if let Some(grid) = k_grid {
                let parsed: Result<Vec<f64>, _> =
                    grid.split(',').map(|t| t.trim().parse::<f64>()).collect();
                config.k_grid =
                    Some(parsed.map_err(|e| CliError::Validation(format!("bad --k-grid: {e}")))?);
            }
            Ok(config)
        }
        CliCommand::Significance(common) => lower(Command::Significance, &common),
        CliCommand::Mine(common) => lower(Command::Mine, &common),
        CliCommand::Gen { common, transactions, items, avg_length } => {
            let mut config = lower(Command::Gen, &common)?;
            config.gen_transactions = Some(transactions);
            config.gen_items = Some(items);
            config.gen_avg_length = Some(avg_length);
            Ok(config)
        }
        CliCommand::Bench { common, steps } => {
            let mut config = lower(Command::Bench, &common)?;
            config.steps = Some(steps);
            Ok(config)
        }
        CliCommand::Run { config } => {
            let text =
                std::fs::read_to_string(&config).map_err(|e| CliError::io(&config.as_str(), e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("bad config file: {e}")))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match build_config(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Ok(threads) = std::env::var("BJDM_SAMPLER_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) => config.parallelism = n,
            Err(_) => {
                eprintln!("error: BJDM_SAMPLER_THREADS must be an integer");
                return ExitCode::from(2);
            }
        }
    }
    match commands::execute(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
