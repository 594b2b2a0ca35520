use std::path::{Path, PathBuf};

use lcsched_core::gen::{GenConfig, PriorMode};
use lcsched_core::learning::PriorFitConfig;
use lcsched_core::scheduler::{SearchConfig, StrategyConfig, StrategyKind};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// All experiment settings. Every section and field is optional in the
/// TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub speedup: SpeedupConfig,
    pub conservatism: ConservatismConfig,
    pub kalman: KalmanConfig,
    pub session: SessionConfig,
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.speedup.validate()?;
        self.conservatism.validate()?;
        self.kalman.validate()?;
        self.session.validate()
    }
}

fn bad(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedupConfig {
    pub sizes: Vec<usize>,
    pub n_agents: usize,
    /// Quadrature grid spacing in seconds; the grid grows with the horizon.
    pub grid_spacing: f64,
    /// Each timed call is repeated until this much time has passed.
    pub min_timing_secs: f64,
}

impl Default for SpeedupConfig {
    fn default() -> Self {
        Self {
            sizes: vec![25, 50, 75],
            n_agents: 3,
            grid_spacing: 2.0,
            min_timing_secs: 0.05,
        }
    }
}

impl SpeedupConfig {
    fn validate(&self) -> Result<(), BenchError> {
        if self.sizes.is_empty() || self.sizes.iter().any(|&s| !(1..=100).contains(&s)) {
            return Err(bad("speedup.sizes must be non-empty and within 1..=100"));
        }
        if !(1..=3).contains(&self.n_agents) {
            return Err(bad("speedup.n_agents must lie in 1..=3"));
        }
        if !(self.grid_spacing > 0.0) || !(self.min_timing_secs >= 0.0) {
            return Err(bad("speedup.grid_spacing must be positive and min_timing_secs non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConservatismConfig {
    pub n_tasks: usize,
    pub n_agents: usize,
    pub samples: usize,
    /// Makespan quantile compared, `1 − ε` of the robustness target.
    pub quantile: f64,
    pub search: SearchConfig,
}

impl Default for ConservatismConfig {
    fn default() -> Self {
        Self {
            n_tasks: 25,
            n_agents: 3,
            samples: 100_000,
            quantile: 0.95,
            search: SearchConfig {
                time_limit_secs: None,
                max_generations: Some(20),
                ..SearchConfig::default()
            },
        }
    }
}

impl ConservatismConfig {
    fn validate(&self) -> Result<(), BenchError> {
        if !(1..=100).contains(&self.n_tasks) || !(1..=3).contains(&self.n_agents) {
            return Err(bad("conservatism.n_tasks must lie in 1..=100 and n_agents in 1..=3"));
        }
        if self.samples == 0 || !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(bad("conservatism.samples must be positive and quantile in (0, 1)"));
        }
        self.search.validate().map_err(|e| bad(format!("conservatism.search: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanConfig {
    /// Workers behind each population prior.
    pub n_agents: usize,
    /// Repetitions observed per worker and per evaluated agent.
    pub iterations: u32,
    pub noise_fraction: f64,
    pub fit: PriorFitConfig,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            n_agents: 50,
            iterations: 20,
            noise_fraction: 0.08,
            fit: PriorFitConfig::default(),
        }
    }
}

impl KalmanConfig {
    fn validate(&self) -> Result<(), BenchError> {
        if self.n_agents < 2 || self.iterations < 3 {
            return Err(bad("kalman.n_agents must be at least 2 and iterations at least 3"));
        }
        if !(self.noise_fraction >= 0.0) {
            return Err(bad("kalman.noise_fraction must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Instance JSON to run instead of a generated one; needs `truth`.
    pub instance: Option<PathBuf>,
    /// Hidden-curve JSON matching `instance`.
    pub truth: Option<PathBuf>,
    pub gen: GenConfig,
    pub strategy: StrategyConfig,
    pub search: SearchConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            instance: None,
            truth: None,
            gen: GenConfig {
                n_tasks: 6,
                n_agents: 3,
                prior: PriorMode::Population {
                    workers: 20,
                    iterations: 5,
                    fit: PriorFitConfig::default(),
                },
                ..GenConfig::default()
            },
            strategy: StrategyConfig::new(StrategyKind::Exploit, 5),
            search: SearchConfig {
                time_limit_secs: None,
                max_generations: Some(30),
                ..SearchConfig::default()
            },
        }
    }
}

impl SessionConfig {
    fn validate(&self) -> Result<(), BenchError> {
        if self.instance.is_some() != self.truth.is_some() {
            return Err(bad("session.instance and session.truth must be given together"));
        }
        if self.instance.is_none() {
            self.gen.validate().map_err(|e| bad(format!("session.gen: {e}")))?;
        }
        self.strategy.validate().map_err(|e| bad(format!("session.strategy: {e}")))?;
        self.search.validate().map_err(|e| bad(format!("session.search: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg: BenchConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, BenchConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg: BenchConfig = toml::from_str(
            "[speedup]\nsizes = [10, 20]\n[session.strategy]\nkind = \"annealed\"\ntotal_rounds = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.speedup.sizes, [10, 20]);
        assert_eq!(cfg.speedup.n_agents, 3);
        assert_eq!(cfg.session.strategy.kind, StrategyKind::Annealed);
        assert_eq!(cfg.session.strategy.lambda_explore, 50.0);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut cfg = BenchConfig::default();
        cfg.speedup.sizes = vec![0];
        assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
        let mut cfg = BenchConfig::default();
        cfg.session.strategy.total_rounds = 0;
        assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
        assert!(toml::from_str::<BenchConfig>("[speedup]\nsizez = [1]\n").is_err());
    }
}
