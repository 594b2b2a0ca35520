//! Schedule construction and improvement.

mod edf;
mod evolve;
mod mutate;
mod objective;
mod projection;
mod strategy;

pub use edf::edf_seed;
pub use evolve::{evolve, evolve_from, EvolveResult, SearchConfig};
pub use mutate::{mutate, MutationMix};
pub use objective::{entropy_term, objective, Evaluation, ObjectiveValue, Score};
pub use projection::{repetition_indices, schedule_durations, Projections};
pub use strategy::{strategy_lambda, StrategyConfig, StrategyKind};
