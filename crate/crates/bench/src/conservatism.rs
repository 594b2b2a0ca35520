use std::collections::BTreeMap;

use lcsched_core::gen::{generate, GenConfig};
use lcsched_core::scheduler::{evolve, schedule_durations, Projections, SearchConfig};
use lcsched_core::stochastic::{monte_carlo_oracle, propagate};
use lcsched_core::{GaussianDist, IterRef, ProblemInstance, Schedule};

use crate::config::ConservatismConfig;
use crate::record;
use crate::report::{ci95, mean, median, stddev, ExperimentReport};
use crate::BenchError;

/// Percent by which the bound's makespan quantile exceeds the simulated one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conservatism {
    pub bound_quantile: f64,
    pub simulated_quantile: f64,
    pub percent: f64,
}

pub fn conservatism_of(
    instance: &ProblemInstance,
    schedule: &Schedule,
    durations: &BTreeMap<IterRef, GaussianDist>,
    quantile: f64,
    samples: usize,
    seed: u64,
) -> Result<Conservatism, BenchError> {
    let bound = propagate(instance, schedule, durations)?.makespan_ub.quantile(quantile);
    let simulated = monte_carlo_oracle(instance, schedule, durations, samples, seed)?.makespan_quantile(quantile);
    Ok(Conservatism {
        bound_quantile: bound,
        simulated_quantile: simulated,
        percent: 100.0 * (bound - simulated) / simulated,
    })
}

/// Compares the bound's makespan quantile with Monte Carlo on searched
/// schedules of generated instances.
pub fn cmd_conservatism(cfg: &ConservatismConfig, trials: usize, seed: u64) -> Result<ExperimentReport, BenchError> {
    let mut records = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_seed = seed.wrapping_add(trial as u64);
        let (inst, _) = generate(&GenConfig {
            n_tasks: cfg.n_tasks,
            n_agents: cfg.n_agents,
            seed: trial_seed,
            ..GenConfig::default()
        })?;
        let search = SearchConfig {
            seed: trial_seed,
            ..cfg.search.clone()
        };
        let best = evolve(&inst, &Projections::from_instance(&inst), &search)?;
        let durations = schedule_durations(&inst, &best.best)?;
        let c = conservatism_of(&inst, &best.best, &durations, cfg.quantile, cfg.samples, trial_seed)?;
        records.push(record!(
            "trial" => trial,
            "robust" => best.robust,
            "bound_quantile" => c.bound_quantile,
            "simulated_quantile" => c.simulated_quantile,
            "conservatism_percent" => c.percent,
        ));
    }
    let pct: Vec<f64> = records.iter().filter_map(|r| r["conservatism_percent"].as_f64()).collect();
    let summary = BTreeMap::from([
        ("median_percent".to_string(), median(&pct)),
        ("mean_percent".to_string(), mean(&pct)),
        ("stddev_percent".to_string(), stddev(&pct)),
        ("ci95_percent".to_string(), ci95(&pct)),
        ("min_percent".to_string(), pct.iter().copied().fold(f64::INFINITY, f64::min)),
    ]);
    Ok(ExperimentReport::new("conservatism", seed, trials, records, summary))
}
