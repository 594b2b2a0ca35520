use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::edf::edf_plan;
use super::mutate::{mutate_plan, MutationMix, DEFAULT_MAX_RETRIES};
use super::objective::{Evaluator, ObjectiveValue, Score};
use super::projection::Projections;
use crate::error::{Error, Result};
use crate::layout::{Layout, Plan};
use crate::model::{validate_schedule, ProblemInstance, Schedule};
use crate::stochastic::bound::BoundConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub population_size: usize,
    /// Share of each generation kept as parents of the next.
    pub elite_fraction: f64,
    pub mutation: MutationMix,
    /// Wall-clock limit per search; `None` for no limit.
    pub time_limit_secs: Option<f64>,
    /// Generations after the seeded population; `None` for no limit.
    pub max_generations: Option<usize>,
    pub seed: u64,
    pub lambda: f64,
    pub max_retries: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: 64,
            elite_fraction: 0.25,
            mutation: MutationMix::default(),
            time_limit_secs: Some(5.0),
            max_generations: Some(200),
            seed: 0,
            lambda: 0.0,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("population_size must be at least 2".into()));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::Config("elite_fraction must lie in (0, 1)".into()));
        }
        match (self.time_limit_secs, self.max_generations) {
            (None, None) => return Err(Error::Config("set time_limit_secs or max_generations".into())),
            (Some(t), _) if !(t > 0.0) => return Err(Error::Config("time_limit_secs must be positive".into())),
            _ => {}
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        self.mutation.validate()
    }

    fn elites(&self) -> usize {
        ((self.population_size as f64 * self.elite_fraction).round() as usize).clamp(1, self.population_size - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveResult {
    pub best: Schedule,
    pub objective: ObjectiveValue,
    /// Whether every deadline passes; if not, `best` is the candidate with
    /// the fewest failed deadlines.
    pub robust: bool,
    pub failed_deadlines: usize,
    /// Incumbent objective after seeding and after each generation.
    pub history: Vec<ObjectiveValue>,
    /// Whether the incumbent was robust at each history entry.
    pub history_robust: Vec<bool>,
    pub generations: usize,
    pub evaluations: usize,
}

/// Evolutionary search seeded with the EDF schedule.
pub fn evolve(instance: &ProblemInstance, projections: &Projections, config: &SearchConfig) -> Result<EvolveResult> {
    evolve_from(instance, projections, config, &[])
}

/// Like [`evolve`], with extra starting schedules (for example the previous
/// round's winner). Extra seeds that do not fit the instance are skipped.
pub fn evolve_from(
    instance: &ProblemInstance,
    projections: &Projections,
    config: &SearchConfig,
    extra_seeds: &[Schedule],
) -> Result<EvolveResult> {
    config.validate()?;
    let started = Instant::now();
    let deadline = config.time_limit_secs.map(|s| started + Duration::from_secs_f64(s));
    let layout = Layout::new(instance)?;
    let eval = Evaluator::new(instance, &layout, projections, config.lambda, BoundConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut seeds = vec![edf_plan(&layout, projections)?];
    for s in extra_seeds {
        if validate_schedule(instance, s).is_ok() {
            seeds.push(layout.plan_from_schedule(s)?);
        }
    }
    seeds.truncate(config.population_size);

    let mut fresh = seeds.clone();
    while fresh.len() < config.population_size {
        let mut p = seeds[fresh.len() % seeds.len()].clone();
        for _ in 0..rng.random_range(1..=3) {
            if let Ok(m) = mutate_plan(&layout, &p, &config.mutation, config.max_retries, &mut rng) {
                p = m;
            }
        }
        fresh.push(p);
    }
    let mut evaluations = 0;
    let mut population = score_all(&eval, fresh, &mut evaluations)?;

    let mut history = vec![population[0].1.objective];
    let mut history_robust = vec![population[0].1.robust()];
    let mut generations = 0;
    let n_elite = config.elites();
    while config.max_generations.is_none_or(|g| generations < g) && deadline.is_none_or(|d| Instant::now() < d) {
        let any_robust = population[0].1.robust();
        let elites: Vec<(Plan, Score)> = population
            .into_iter()
            .take(n_elite)
            .filter(|(_, s)| !any_robust || s.robust())
            .collect();
        let children: Vec<Plan> = (elites.len()..config.population_size)
            .map(|_| {
                let parent = &elites[rng.random_range(0..elites.len())].0;
                mutate_plan(&layout, parent, &config.mutation, config.max_retries, &mut rng)
                    .unwrap_or_else(|_| parent.clone())
            })
            .collect();
        let mut next = elites;
        next.extend(score_all(&eval, children, &mut evaluations)?);
        next.sort_by(|a, b| a.1.rank(&b.1));
        population = next;
        generations += 1;
        history.push(population[0].1.objective);
        history_robust.push(population[0].1.robust());
    }

    let (plan, score) = &population[0];
    Ok(EvolveResult {
        best: layout.schedule_from_plan(plan),
        objective: score.objective,
        robust: score.robust(),
        failed_deadlines: score.failed,
        history,
        history_robust,
        generations,
        evaluations,
    })
}

fn score_all(eval: &Evaluator<'_>, plans: Vec<Plan>, count: &mut usize) -> Result<Vec<(Plan, Score)>> {
    *count += plans.len();
    let mut scored: Vec<(Plan, Score)> = plans
        .into_par_iter()
        .map(|p| eval.score(&p).map(|s| (p, s)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.1.rank(&b.1));
    Ok(scored)
}
