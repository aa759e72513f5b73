use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use algas4::accuracy::{verify_accuracy, DEFAULT_GRID};
use algas4::bench::bench;
use algas4::config::{parse_config, ConfigError, RunConfig};
use algas4::runner::run_scenario;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ACCURACY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "algas4",
    version,
    about = "Four-corner landing-guidance fabric simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, write the CSV trace and print a JSON summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Trace path; overrides `output.trace` (default trace.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the fixed-point controller with the floating-point reference.
    VerifyAccuracy {
        #[command(flatten)]
        common: Common,
        /// Points per axis of the input grid.
        #[arg(long, default_value_t = DEFAULT_GRID, value_parser = clap::value_parser!(usize))]
        grid: usize,
    },
    /// Measure fabric throughput with one worker and with `--workers`.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1_000_000)]
        ticks: u64,
    },
    /// Check a configuration file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Threads used for per-corner processing.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..=64))]
    workers: Option<u16>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(workers) = self.workers {
            cfg = cfg.with_workers(workers as usize);
        }
        Ok(cfg)
    }
}

enum Failure {
    Config(ConfigError),
    Runtime(String),
    Accuracy,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Failure::Runtime(e.to_string())),
        _ => Ok(()),
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { common, out } => {
            let cfg = common.load()?;
            let out = out
                .or_else(|| cfg.trace_path.clone())
                .unwrap_or_else(|| PathBuf::from("trace.csv"));
            let summary = run_scenario(&cfg, &out).map_err(|e| Failure::Runtime(e.to_string()))?;
            print_json(&summary)
        }
        Command::VerifyAccuracy { common, grid } => {
            let cfg = common.load()?;
            let report =
                verify_accuracy(&cfg.fls, grid).map_err(|e| Failure::Runtime(e.to_string()))?;
            print_json(&report)?;
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Accuracy)
            }
        }
        Command::Bench { common, ticks } => {
            let cfg = common.load()?;
            let workers = common.workers.map_or(4, usize::from);
            let report =
                bench(&cfg, ticks, &[1, workers]).map_err(|e| Failure::Runtime(e.to_string()))?;
            print_json(&report)?;
            if report.traces_match {
                Ok(())
            } else {
                Err(Failure::Runtime(
                    "traces differ between worker counts".into(),
                ))
            }
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            print_json(&serde_json::json!({
                "valid": true,
                "duration_ticks": cfg.scenario.duration(),
                "faults": cfg.scenario.faults().len(),
                "failures": cfg.failures.len(),
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Accuracy) => {
            eprintln!("error: accuracy gate failed");
            ExitCode::from(EXIT_ACCURACY)
        }
    }
}
