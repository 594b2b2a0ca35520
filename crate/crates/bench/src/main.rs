use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lcsched_bench::{cmd_conservatism, cmd_kalman, cmd_session, cmd_speedup, BenchConfig, BenchError, ExperimentReport};

#[derive(Parser)]
#[command(name = "bench", version, about = "Scheduling engine experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of trials (instances, agents or sessions).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Write the JSON report here and the records next to it as CSV.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with experiment settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Gaussian bound vs numerical quadrature wall time.
    Speedup,
    /// Bound makespan quantile vs Monte Carlo.
    Conservatism,
    /// Frozen population prior vs adaptive per-agent model.
    Kalman,
    /// Closed-loop multi-round sessions.
    Session,
}

fn run(cli: &Cli) -> Result<ExperimentReport, BenchError> {
    let cfg = match &cli.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    match cli.command {
        Command::Speedup => cmd_speedup(&cfg.speedup, cli.trials.unwrap_or(3), cli.seed),
        Command::Conservatism => cmd_conservatism(&cfg.conservatism, cli.trials.unwrap_or(20), cli.seed),
        Command::Kalman => cmd_kalman(&cfg.kalman, cli.trials.unwrap_or(50), cli.seed),
        Command::Session => cmd_session(&cfg.session, cli.trials.unwrap_or(1), cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|report| {
        print!("{}", report.table());
        match &cli.out {
            Some(path) => report.write(path),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
