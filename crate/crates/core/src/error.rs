use thiserror::Error;

use crate::model::{AgentId, IterRef, TaskId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precedence and agent-order edges contain a cycle")]
    Cycle,

    #[error("precedence graph is cyclic; no feasible list schedule exists")]
    InfeasiblePrecedence,

    #[error("no duration supplied for iteration {0}")]
    MissingDuration(IterRef),

    #[error("iteration {0} is not part of the instance")]
    UnknownIteration(IterRef),

    #[error("agent {0} is not part of the instance")]
    UnknownAgent(AgentId),

    #[error("agent {agent} has no learning curve for task {task}")]
    MissingCurve { agent: AgentId, task: TaskId },

    #[error("schedule is inconsistent: {0}")]
    InvalidSchedule(String),

    #[error("probability mass {lost:.3e} escaped the quadrature grid (upper edge {upper:.1} s)")]
    GridOverflow { lost: f64, upper: f64 },

    #[error("grid density is not normalized: total mass {0}")]
    InvalidDensity(f64),

    #[error("degenerate fitting data: {0}")]
    DegenerateData(String),

    #[error("no valid mutation found after {0} attempts")]
    ExhaustedRetries(usize),

    #[error("invalid configuration: {0}")]
    Config(String),
}
