use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Makespan only.
    Exploit,
    /// Balances assignments for the whole session.
    ExploreExploit,
    /// Balances assignments for the first half of the session, then
    /// optimizes makespan only.
    Annealed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    #[serde(default = "default_lambda_explore")]
    pub lambda_explore: f64,
    #[serde(default = "default_total_rounds")]
    pub total_rounds: u32,
}

fn default_lambda_explore() -> f64 {
    50.0
}

fn default_total_rounds() -> u32 {
    5
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, total_rounds: u32) -> Self {
        Self {
            kind,
            lambda_explore: default_lambda_explore(),
            total_rounds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_rounds == 0 {
            return Err(Error::Config("total_rounds must be at least 1".into()));
        }
        if !(self.lambda_explore >= 0.0) {
            return Err(Error::Config("lambda_explore must be non-negative".into()));
        }
        Ok(())
    }

    /// Rounds `1..=explore_rounds()` are exploration rounds under annealing.
    pub fn explore_rounds(&self) -> u32 {
        self.total_rounds.div_ceil(2)
    }
}

/// Entropy weight for a round (from 1).
pub fn strategy_lambda(strategy: &StrategyConfig, round_index: u32) -> f64 {
    match strategy.kind {
        StrategyKind::Exploit => 0.0,
        StrategyKind::ExploreExploit => strategy.lambda_explore,
        StrategyKind::Annealed if round_index <= strategy.explore_rounds() => strategy.lambda_explore,
        StrategyKind::Annealed => 0.0,
    }
}
