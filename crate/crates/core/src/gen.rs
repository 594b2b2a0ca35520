//! Synthetic problem instances with hidden ground-truth learning curves.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{fit_population_prior, CurveParams, KalmanState, PriorFitConfig, BETA_MAX, C_MIN};
use crate::model::{AgentId, AgentKind, AgentSpec, IterRef, Precondition, ProblemInstance, RelDeadline, TaskId, TaskSpec};

/// Smallest duration a simulated execution can take.
pub const MIN_OBSERVED: f64 = 0.1;

/// A scalar distribution used for curve components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Dist {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Point { value: f64 },
}

impl Dist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dist::Normal { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
            Dist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Dist::Point { value } => value,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Dist::Normal { mean, std } => mean.is_finite() && std >= 0.0 && std.is_finite(),
            Dist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Dist::Point { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid distribution for {name}")))
        }
    }
}

/// Task, agent and joint contributions to one curve parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub task: Dist,
    pub agent: Dist,
    pub joint: Dist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveComponents {
    /// Summed.
    pub c: Components,
    /// Summed.
    pub k: Components,
    /// Averaged.
    pub beta: Components,
}

impl Default for CurveComponents {
    fn default() -> Self {
        let beta = Dist::Uniform { lo: 0.1, hi: 0.8 };
        Self {
            c: Components {
                task: Dist::Normal { mean: 60.0, std: 15.0 },
                agent: Dist::Normal { mean: 20.0, std: 10.0 },
                joint: Dist::Uniform { lo: 0.0, hi: 20.0 },
            },
            k: Components {
                task: Dist::Normal { mean: 30.0, std: 10.0 },
                agent: Dist::Normal { mean: 10.0, std: 5.0 },
                joint: Dist::Uniform { lo: 0.0, hi: 10.0 },
            },
            beta: Components {
                task: beta,
                agent: beta,
                joint: beta,
            },
        }
    }
}

/// One draw of the components shared by everyone doing a task (or done by
/// one agent across tasks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub c: f64,
    pub k: f64,
    pub beta: f64,
}

impl CurveComponents {
    pub fn task_part<R: Rng + ?Sized>(&self, rng: &mut R) -> Contribution {
        Contribution {
            c: self.c.task.sample(rng),
            k: self.k.task.sample(rng),
            beta: self.beta.task.sample(rng),
        }
    }

    pub fn agent_part<R: Rng + ?Sized>(&self, rng: &mut R) -> Contribution {
        Contribution {
            c: self.c.agent.sample(rng),
            k: self.k.agent.sample(rng),
            beta: self.beta.agent.sample(rng),
        }
    }

    /// Combines task and agent parts with a fresh joint part.
    pub fn curve<R: Rng + ?Sized>(&self, task: &Contribution, agent: &Contribution, rng: &mut R) -> CurveParams {
        let c = task.c + agent.c + self.c.joint.sample(rng);
        let k = task.k + agent.k + self.k.joint.sample(rng);
        let beta = (task.beta + agent.beta + self.beta.joint.sample(rng)) / 3.0;
        CurveParams::new(c.max(C_MIN), k.max(0.0), beta.clamp(0.0, BETA_MAX))
    }

    /// A new individual's curve for a task: fresh agent and joint parts.
    pub fn individual<R: Rng + ?Sized>(&self, task: &Contribution, rng: &mut R) -> CurveParams {
        let agent = self.agent_part(rng);
        self.curve(task, &agent, rng)
    }

    fn validate(&self) -> Result<()> {
        for (name, comp) in [("c", &self.c), ("k", &self.k), ("beta", &self.beta)] {
            comp.task.validate(name)?;
            comp.agent.validate(name)?;
            comp.joint.validate(name)?;
        }
        Ok(())
    }
}

/// Where human agents' starting curve states come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PriorMode {
    /// The true curve with no parameter uncertainty and the true
    /// first-repetition noise.
    Truth,
    /// Fitted per task from simulated workers sharing the task component.
    Population {
        workers: usize,
        iterations: u32,
        #[serde(default)]
        fit: PriorFitConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_tasks: usize,
    pub n_agents: usize,
    /// How many of the agents are robots (constant, noiseless durations).
    pub n_robots: usize,
    pub seed: u64,
    pub iterations_per_task: u32,
    /// Chance that a task carries an absolute deadline.
    pub deadline_fraction: f64,
    /// Weights of drawing 0, 1, 2 or 3 predecessors.
    pub precondition_weights: [f64; 4],
    pub wait_probability: f64,
    /// `[a, b]` seconds.
    pub wait_range: [f64; 2],
    pub epsilon: f64,
    /// Hidden noise stddev as a share of the curve mean.
    pub noise_fraction: f64,
    pub curves: CurveComponents,
    pub prior: PriorMode,
    /// Chance that a precondition edge also carries a relative deadline.
    pub relative_deadline_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_tasks: 25,
            n_agents: 3,
            n_robots: 0,
            seed: 0,
            iterations_per_task: 1,
            deadline_fraction: 0.2,
            precondition_weights: [0.4, 0.3, 0.2, 0.1],
            wait_probability: 0.5,
            wait_range: [10.0, 60.0],
            epsilon: 0.05,
            noise_fraction: 0.08,
            curves: CurveComponents::default(),
            prior: PriorMode::Truth,
            relative_deadline_fraction: 0.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if !(1..=100).contains(&self.n_tasks) {
            return fail("n_tasks must lie in 1..=100");
        }
        if !(1..=3).contains(&self.n_agents) {
            return fail("n_agents must lie in 1..=3");
        }
        if self.n_robots > self.n_agents {
            return fail("n_robots exceeds n_agents");
        }
        if self.iterations_per_task == 0 {
            return fail("iterations_per_task must be at least 1");
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.deadline_fraction) || !unit(self.wait_probability) || !unit(self.relative_deadline_fraction) {
            return fail("fractions and probabilities must lie in [0, 1]");
        }
        if self.precondition_weights.iter().any(|w| !(*w >= 0.0)) || self.precondition_weights.iter().sum::<f64>() <= 0.0 {
            return fail("precondition weights must be non-negative and not all zero");
        }
        let [a, b] = self.wait_range;
        if !(a >= 0.0 && a <= b) {
            return fail("wait range must satisfy 0 <= a <= b");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail("epsilon must lie in (0, 1)");
        }
        if !(self.noise_fraction >= 0.0) {
            return fail("noise_fraction must be non-negative");
        }
        if let PriorMode::Population { workers, iterations, .. } = &self.prior {
            if *workers < 2 || *iterations < 3 {
                return fail("population prior needs at least 2 workers and 3 iterations");
            }
        }
        self.curves.validate()
    }
}

/// The hidden curves behind an instance. Only simulations and oracles may
/// look at this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub curves: BTreeMap<AgentId, BTreeMap<TaskId, CurveParams>>,
    /// Noise stddev as a share of the curve mean, per agent.
    pub noise_fraction: BTreeMap<AgentId, f64>,
}

impl GroundTruth {
    pub fn curve(&self, agent: &AgentId, task: &TaskId) -> Option<&CurveParams> {
        self.curves.get(agent)?.get(task)
    }

    pub fn noise_std(&self, agent: &AgentId, task: &TaskId, i: u32) -> f64 {
        let frac = self.noise_fraction.get(agent).copied().unwrap_or(0.0);
        self.curve(agent, task).map_or(0.0, |c| frac * c.mean_at(f64::from(i)))
    }
}

/// A simulated execution: the true curve mean plus hidden noise, floored
/// at `MIN_OBSERVED`.
pub fn sample_execution<R: Rng + ?Sized>(
    truth: &GroundTruth,
    agent: &AgentId,
    task: &TaskId,
    iteration: u32,
    rng: &mut R,
) -> f64 {
    let curve = truth.curve(agent, task).expect("agent has a true curve for the task");
    let mean = curve.mean_at(f64::from(iteration));
    let noise = truth.noise_std(agent, task, iteration) * rng.sample::<f64, _>(StandardNormal);
    (mean + noise).max(MIN_OBSERVED)
}

/// Noisy traces of `workers` individuals over repetitions `1..=iterations`.
pub fn simulate_population<R: Rng + ?Sized>(
    components: &CurveComponents,
    task: &Contribution,
    noise_fraction: f64,
    workers: usize,
    iterations: u32,
    rng: &mut R,
) -> Vec<Vec<(u32, f64)>> {
    (0..workers)
        .map(|_| {
            let curve = components.individual(task, rng);
            (1..=iterations)
                .map(|i| {
                    let mean = curve.mean_at(f64::from(i));
                    let z: f64 = rng.sample(StandardNormal);
                    (i, (mean + noise_fraction * mean * z).max(MIN_OBSERVED))
                })
                .collect()
        })
        .collect()
}

fn agent_ids(cfg: &GenConfig) -> Vec<(AgentId, AgentKind)> {
    let humans = cfg.n_agents - cfg.n_robots;
    (1..=humans)
        .map(|i| (AgentId(format!("h{i}")), AgentKind::Human))
        .chain((1..=cfg.n_robots).map(|i| (AgentId(format!("r{i}")), AgentKind::Robot)))
        .collect()
}

/// Draws an instance and its hidden curves. Deterministic for a seed.
pub fn generate(config: &GenConfig) -> Result<(ProblemInstance, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_iter = config.iterations_per_task;
    let task_ids: Vec<TaskId> = (1..=config.n_tasks).map(|i| TaskId(format!("t{i:03}"))).collect();
    let agents = agent_ids(config);

    // Curves.
    let task_parts: Vec<Contribution> = task_ids.iter().map(|_| config.curves.task_part(&mut rng)).collect();
    let agent_parts: Vec<Contribution> = agents.iter().map(|_| config.curves.agent_part(&mut rng)).collect();
    let mut truth = GroundTruth {
        curves: BTreeMap::new(),
        noise_fraction: BTreeMap::new(),
    };
    for ((agent, kind), part) in agents.iter().zip(&agent_parts) {
        let curves = task_ids
            .iter()
            .zip(&task_parts)
            .map(|(t, tp)| {
                let mut c = config.curves.curve(tp, part, &mut rng);
                if *kind == AgentKind::Robot {
                    c = CurveParams::constant(c.c);
                }
                (t.clone(), c)
            })
            .collect();
        truth.curves.insert(agent.clone(), curves);
        let frac = if *kind == AgentKind::Robot { 0.0 } else { config.noise_fraction };
        truth.noise_fraction.insert(agent.clone(), frac);
    }

    // Preconditions over earlier tasks only.
    let mut tasks: Vec<TaskSpec> = task_ids.iter().map(|t| TaskSpec::new(t.clone(), n_iter)).collect();
    let weight_total: f64 = config.precondition_weights.iter().sum();
    let [wait_lo, wait_hi] = config.wait_range;
    for j in 1..tasks.len() {
        let mut u = rng.random::<f64>() * weight_total;
        let mut m = 0;
        while m < 3 && u >= config.precondition_weights[m] {
            u -= config.precondition_weights[m];
            m += 1;
        }
        let m = m.min(j);
        let mut preds = sample(&mut rng, j, m).into_vec();
        preds.sort_unstable();
        for p in preds {
            let wait = if rng.random::<f64>() < config.wait_probability {
                wait_lo + (wait_hi - wait_lo) * rng.random::<f64>()
            } else {
                0.0
            };
            let after = IterRef::new(task_ids[p].clone(), n_iter);
            if rng.random::<f64>() < config.relative_deadline_fraction {
                // Room for the anchor, the wait and the successor's work, tripled.
                let work = mean_first_duration(&truth, &agents, &task_ids[p])
                    + mean_first_duration(&truth, &agents, &task_ids[j]) * f64::from(n_iter);
                tasks[p].rel_deadlines.push(RelDeadline {
                    from_n: n_iter,
                    to: IterRef::new(task_ids[j].clone(), n_iter),
                    budget: wait + 3.0 * work,
                });
            }
            tasks[j].preconditions.push(Precondition { after, wait });
        }
    }

    // Earliest possible mean finish of each task.
    let mut earliest = vec![0.0; tasks.len()];
    for j in 0..tasks.len() {
        let fastest = agents
            .iter()
            .map(|(a, _)| truth.curve(a, &task_ids[j]).map_or(f64::INFINITY, |c| c.mean_at(1.0)))
            .fold(f64::INFINITY, f64::min);
        let release = tasks[j]
            .preconditions
            .iter()
            .map(|p| {
                let k = task_ids.iter().position(|t| *t == p.after.task).expect("earlier task");
                earliest[k] + p.wait
            })
            .fold(0.0, f64::max);
        earliest[j] = release + fastest;
    }

    // Budget: the team's share of all expected work and mandated waits plus
    // three standard deviations, but never below the longest chain.
    let (mut mu, mut var) = (0.0, 0.0);
    for (t, spec) in task_ids.iter().zip(&tasks) {
        let mean = mean_first_duration(&truth, &agents, t);
        let sd = agents
            .iter()
            .map(|(a, _)| truth.noise_std(a, t, 1))
            .sum::<f64>()
            / agents.len() as f64;
        mu += mean * f64::from(n_iter) + spec.preconditions.iter().map(|p| p.wait).sum::<f64>();
        var += sd * sd * f64::from(n_iter);
    }
    let longest_chain = earliest.iter().copied().fold(0.0, f64::max);
    let time_budget = ((mu + 3.0 * var.sqrt()) / agents.len() as f64).max(longest_chain);

    // Deadlines between the earliest possible mean finish and the budget.
    for (j, t) in tasks.iter_mut().enumerate() {
        if rng.random::<f64>() < config.deadline_fraction {
            let lo = earliest[j];
            let hi = time_budget.max(lo);
            t.abs_deadline = Some(lo + (hi - lo) * rng.random::<f64>());
        }
    }

    // Starting curve states.
    let mut library: BTreeMap<TaskId, KalmanState> = BTreeMap::new();
    if let PriorMode::Population { workers, iterations, fit } = &config.prior {
        for (t, tp) in task_ids.iter().zip(&task_parts) {
            let traces = simulate_population(&config.curves, tp, config.noise_fraction, *workers, *iterations, &mut rng);
            library.insert(t.clone(), fit_population_prior(&traces, fit)?);
        }
    }
    let agent_specs = agents
        .iter()
        .map(|(agent, kind)| {
            let curve_prior = task_ids
                .iter()
                .map(|t| {
                    let c = *truth.curve(agent, t).expect("generated above");
                    let state = match (kind, &config.prior) {
                        (AgentKind::Robot, _) => KalmanState::fixed(c),
                        (AgentKind::Human, PriorMode::Truth) => KalmanState::known(c, truth.noise_std(agent, t, 1)),
                        (AgentKind::Human, PriorMode::Population { .. }) => library[t].clone(),
                    };
                    (t.clone(), state)
                })
                .collect();
            AgentSpec {
                agent_id: agent.clone(),
                kind: *kind,
                curve_prior,
                completed_reps: BTreeMap::new(),
            }
        })
        .collect();

    Ok((
        ProblemInstance {
            tasks,
            agents: agent_specs,
            epsilon: config.epsilon,
            time_budget: Some(time_budget),
        },
        truth,
    ))
}

fn mean_first_duration(truth: &GroundTruth, agents: &[(AgentId, AgentKind)], task: &TaskId) -> f64 {
    agents
        .iter()
        .map(|(a, _)| truth.curve(a, task).map_or(0.0, |c| c.mean_at(1.0)))
        .sum::<f64>()
        / agents.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_instance;

    #[test]
    fn same_seed_same_output() {
        let cfg = GenConfig {
            seed: 11,
            ..GenConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn point_mass_components_give_identical_curves() {
        let p = |v| Dist::Point { value: v };
        let cfg = GenConfig {
            curves: CurveComponents {
                c: Components { task: p(50.0), agent: p(10.0), joint: p(5.0) },
                k: Components { task: p(20.0), agent: p(4.0), joint: p(1.0) },
                beta: Components { task: p(0.3), agent: p(0.6), joint: p(0.6) },
            },
            ..GenConfig::default()
        };
        let (_, truth) = generate(&cfg).unwrap();
        for curves in truth.curves.values() {
            for c in curves.values() {
                assert_eq!(*c, CurveParams::new(65.0, 25.0, 0.5));
            }
        }
    }

    #[test]
    fn robots_are_constant_and_noiseless() {
        let cfg = GenConfig {
            n_robots: 1,
            ..GenConfig::default()
        };
        let (inst, truth) = generate(&cfg).unwrap();
        assert!(validate_instance(&inst).is_ok());
        let r = AgentId::from("r1");
        let t = TaskId::from("t001");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let first = sample_execution(&truth, &r, &t, 1, &mut rng);
        for i in 2..10 {
            assert_eq!(sample_execution(&truth, &r, &t, i, &mut rng), first);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            GenConfig { n_tasks: 0, ..GenConfig::default() },
            GenConfig { n_agents: 4, ..GenConfig::default() },
            GenConfig { wait_range: [5.0, 1.0], ..GenConfig::default() },
            GenConfig { deadline_fraction: 1.5, ..GenConfig::default() },
        ] {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn population_prior_is_shared_by_humans() {
        let cfg = GenConfig {
            n_tasks: 3,
            n_agents: 2,
            prior: PriorMode::Population {
                workers: 20,
                iterations: 5,
                fit: PriorFitConfig::default(),
            },
            ..GenConfig::default()
        };
        let (inst, _) = generate(&cfg).unwrap();
        let t = TaskId::from("t002");
        assert_eq!(inst.agents[0].curve_prior[&t], inst.agents[1].curve_prior[&t]);
        assert!(inst.agents[0].curve_prior[&t].p[0][0] > 0.0);
    }
}
