use std::collections::BTreeMap;

use lcsched_core::gen::{simulate_population, CurveComponents};
use lcsched_core::learning::{fit_population_prior, kalman_update, DurationObservation, PriorFitConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::KalmanConfig;
use crate::record;
use crate::report::{mean, median, ExperimentReport};
use crate::BenchError;

/// Prediction error of a frozen population prior against the same prior
/// refined online, for one simulated agent per trial.
///
/// Each trial draws a new task, fits a prior from `n_agents` simulated
/// workers, then follows a new individual for `iterations` repetitions.
/// Before each observation both models predict its mean; the error is the
/// distance to the individual's true curve, summed over the repetitions.
pub fn cmd_kalman(cfg: &KalmanConfig, trials: usize, seed: u64) -> Result<ExperimentReport, BenchError> {
    let components = CurveComponents::default();
    let mut records = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_seed = seed.wrapping_add(trial as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let task = components.task_part(&mut rng);
        let workers = simulate_population(&components, &task, cfg.noise_fraction, cfg.n_agents, cfg.iterations, &mut rng);
        let fit = PriorFitConfig {
            seed: trial_seed,
            ..cfg.fit.clone()
        };
        let prior = fit_population_prior(&workers, &fit)?;

        let truth = components.individual(&task, &mut rng);
        let mut state = prior.clone();
        let (mut frozen, mut adaptive) = (0.0, 0.0);
        for i in 1..=cfg.iterations {
            let it = f64::from(i);
            let true_mean = truth.mean_at(it);
            frozen += (prior.x.mean_at(it) - true_mean).abs();
            adaptive += (state.x.mean_at(it) - true_mean).abs();
            let z: f64 = rng.sample(StandardNormal);
            let observed = (true_mean * (1.0 + cfg.noise_fraction * z)).max(lcsched_core::gen::MIN_OBSERVED);
            state = kalman_update(
                &state,
                &DurationObservation {
                    agent_id: "agent".into(),
                    task_id: "task".into(),
                    iteration_index: i,
                    observed_duration: observed,
                },
            );
        }
        records.push(record!(
            "trial" => trial,
            "frozen_error" => frozen,
            "adaptive_error" => adaptive,
            "improved" => adaptive < frozen,
        ));
    }
    let frozen: Vec<f64> = records.iter().filter_map(|r| r["frozen_error"].as_f64()).collect();
    let adaptive: Vec<f64> = records.iter().filter_map(|r| r["adaptive_error"].as_f64()).collect();
    let improved = records.iter().filter(|r| r["improved"] == true).count();
    let diffs: Vec<f64> = frozen.iter().zip(&adaptive).map(|(f, a)| f - a).collect();
    let summary = BTreeMap::from([
        ("median_frozen_error".to_string(), median(&frozen)),
        ("median_adaptive_error".to_string(), median(&adaptive)),
        ("mean_improvement".to_string(), mean(&diffs)),
        ("improved_fraction".to_string(), improved as f64 / trials.max(1) as f64),
    ]);
    Ok(ExperimentReport::new("kalman", seed, trials, records, summary))
}
