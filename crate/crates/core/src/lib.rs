//! Scheduling of human-robot teams whose task durations follow learning
//! curves, with chance-constrained deadlines.

pub mod error;
pub mod gaussian;
pub mod gen;
pub mod layout;
pub mod learning;
pub mod model;
pub mod rounds;
pub mod scheduler;
mod serde_util;
pub mod stochastic;

pub use error::{Error, Result};
pub use gaussian::{sum_gaussian, GaussianDist};
pub use model::{
    validate_instance, validate_schedule, AgentId, AgentKind, AgentSpec, DeadlineRef, IterRef, ProblemInstance,
    RobustnessReport, Schedule, TaskId, TaskSpec, Violation,
};
