mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "prlc", version, about = "Plan, learn and simulate PRLC request schedules")]
struct Cli {
    /// Directory for output files; defaults to the scenario's output_dir or `out`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Override the scenario's probability mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Re-read every product and fail with exit code 3 on any inconsistency.
    #[arg(long, global = true)]
    self_check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    InfiniteQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Learner {
    Qlearn,
    QlearnVe,
}

impl Learner {
    fn key(self) -> &'static str {
        match self {
            Learner::Qlearn => "qlearn",
            Learner::QlearnVe => "qlearn-ve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Randsched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    Episodes,
    UpdatePeriod,
    Loss,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the scenario's MDP by value iteration and export the policy.
    Plan {
        config: PathBuf,
        /// Discount factor; defaults to planning.gamma.
        #[arg(long)]
        gamma: Option<f64>,
        /// Policy file to write.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Learn a policy with Q-learning, with or without virtual experience.
    Train {
        config: PathBuf,
        #[arg(long, value_enum)]
        algo: Learner,
        /// Training seed; defaults to 0, or to the checkpoint's seed on resume.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured episode count.
        #[arg(long)]
        episodes: Option<u64>,
        /// Continue from a checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many episodes in this invocation and checkpoint.
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Simulate delivery with the real codec under a policy or baseline.
    Simulate {
        config: PathBuf,
        #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
        policy: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also render the per-generation curve as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Sweep one parameter and emit long-format results.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Training seeds per cell; defaults to training.seeds.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Check a scenario file and print its dimensions.
    ValidateConfig { config: PathBuf },
}

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    SelfCheck(String),
    Runtime(String),
}

impl From<prlc::Error> for Failure {
    fn from(e: prlc::Error) -> Self {
        match e {
            prlc::Error::Config { .. } | prlc::Error::FingerprintMismatch { .. } => Failure::Validation(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::SelfCheck(m)) => {
            eprintln!("self-check failed: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
