//! Desk-scale experiments for the scheduling engine and a closed-loop
//! simulator of multi-round sessions.

pub mod config;
pub mod conservatism;
pub mod kalman;
pub mod report;
pub mod session;
pub mod speedup;

pub use config::BenchConfig;
pub use conservatism::{cmd_conservatism, conservatism_of, Conservatism};
pub use kalman::cmd_kalman;
pub use report::{ExperimentReport, Machine, Record};
pub use session::{cmd_session, simulate_session, RoundOutcome};
pub use speedup::cmd_speedup;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] lcsched_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Core(lcsched_core::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}
