use std::collections::BTreeMap;

use lcsched_core::gen::{generate, sample_execution, GenConfig, GroundTruth};
use lcsched_core::rounds::{apply_round, round_slots};
use lcsched_core::scheduler::{
    entropy_term, evolve_from, objective, strategy_lambda, Projections, SearchConfig,
};
use lcsched_core::stochastic::propagate;
use lcsched_core::{GaussianDist, IterRef, ProblemInstance, Schedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SessionConfig;
use crate::record;
use crate::report::{mean, ExperimentReport, Record};
use crate::BenchError;

/// Outcome of one round of a simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: u32,
    pub lambda: f64,
    pub schedule: Schedule,
    pub robust: bool,
    pub predicted_makespan: f64,
    /// Makespan replayed with the simulated durations.
    pub realized_makespan: f64,
    pub z2: f64,
}

/// Runs the schedule, execute, learn, reschedule loop for every round of
/// `cfg.strategy` on one instance.
pub fn simulate_session(
    mut instance: ProblemInstance,
    truth: &GroundTruth,
    cfg: &SessionConfig,
    seed: u64,
) -> Result<Vec<RoundOutcome>, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut previous: Option<Schedule> = None;
    let mut out = Vec::new();
    for round in 1..=cfg.strategy.total_rounds {
        let lambda = strategy_lambda(&cfg.strategy, round);
        let projections = Projections::from_instance(&instance);
        let search = SearchConfig {
            seed: seed.wrapping_mul(1000).wrapping_add(u64::from(round)),
            lambda,
            ..cfg.search.clone()
        };
        let best = evolve_from(&instance, &projections, &search, previous.as_slice())?;
        let eval = objective(&best.best, &instance, &projections, lambda)?;

        let mut observed = BTreeMap::new();
        for slot in round_slots(&instance, &best.best)? {
            let d = sample_execution(truth, &slot.agent_id, &slot.iter.task, slot.iteration_index, &mut rng);
            observed.insert(slot.iter, d);
        }
        let realized: BTreeMap<IterRef, GaussianDist> =
            observed.iter().map(|(r, &d)| (r.clone(), GaussianDist::point(d))).collect();
        let realized_makespan = propagate(&instance, &best.best, &realized)?.makespan_ub.mean;
        let z2 = entropy_term(&best.best, &instance);

        out.push(RoundOutcome {
            round,
            lambda,
            schedule: best.best.clone(),
            robust: eval.feasible(),
            predicted_makespan: eval.objective.z1,
            realized_makespan,
            z2,
        });
        apply_round(&mut instance, &best.best, &observed)?;
        previous = Some(best.best);
    }
    Ok(out)
}

fn load_instance(cfg: &SessionConfig, seed: u64) -> Result<(ProblemInstance, GroundTruth), BenchError> {
    match (&cfg.instance, &cfg.truth) {
        (Some(i), Some(t)) => {
            let read = |p: &std::path::Path| {
                std::fs::read_to_string(p).map_err(|e| BenchError::Config(format!("cannot read {}: {e}", p.display())))
            };
            let inst: ProblemInstance = serde_json::from_str(&read(i)?)?;
            if let Err(v) = lcsched_core::validate_instance(&inst) {
                let list: Vec<String> = v.iter().map(ToString::to_string).collect();
                return Err(BenchError::Config(format!("invalid instance: {}", list.join("; "))));
            }
            Ok((inst, serde_json::from_str(&read(t)?)?))
        }
        _ => Ok(generate(&GenConfig {
            seed,
            ..cfg.gen.clone()
        })?),
    }
}

/// Closed-loop sessions, one per trial, each on its own seed.
pub fn cmd_session(cfg: &SessionConfig, trials: usize, seed: u64) -> Result<ExperimentReport, BenchError> {
    let mut records: Vec<Record> = Vec::new();
    for trial in 0..trials {
        let trial_seed = seed.wrapping_add(trial as u64);
        let (inst, truth) = load_instance(cfg, trial_seed)?;
        for r in simulate_session(inst, &truth, cfg, trial_seed)? {
            records.push(record!(
                "trial" => trial,
                "round" => r.round,
                "lambda" => r.lambda,
                "robust" => r.robust,
                "predicted_makespan" => r.predicted_makespan,
                "realized_makespan" => r.realized_makespan,
                "z2" => r.z2,
            ));
        }
    }
    let mut summary = BTreeMap::from([
        ("mean_z2".to_string(), mean(&column(&records, "z2", None))),
        ("mean_realized_makespan".to_string(), mean(&column(&records, "realized_makespan", None))),
    ]);
    for round in 1..=cfg.strategy.total_rounds {
        summary.insert(
            format!("mean_realized_makespan_round_{round}"),
            mean(&column(&records, "realized_makespan", Some(round))),
        );
        summary.insert(format!("mean_z2_round_{round}"), mean(&column(&records, "z2", Some(round))));
    }
    Ok(ExperimentReport::new(
        &format!("session_{}", serde_json::to_value(cfg.strategy.kind)?.as_str().unwrap_or("strategy")),
        seed,
        trials,
        records,
        summary,
    ))
}

fn column(records: &[Record], name: &str, round: Option<u32>) -> Vec<f64> {
    records
        .iter()
        .filter(|r| round.is_none_or(|n| r["round"] == n))
        .filter_map(|r| r[name].as_f64())
        .collect()
}
