use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::projection::Projections;
use crate::error::Result;
use crate::layout::{Layout, Plan};
use crate::model::{ProblemInstance, RobustnessReport, Schedule};
use crate::stochastic::bound::BoundConfig;
use crate::stochastic::propagate::{propagate_plan, PropagationResult};
use crate::stochastic::risk::{allocate_risk, check_deadlines, check_robustness_with};

/// `z = z1 + λ·z2`: expected makespan plus weighted assignment imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub z: f64,
    pub z1: f64,
    pub z2: f64,
    pub lambda: f64,
}

impl ObjectiveValue {
    pub fn new(z1: f64, z2: f64, lambda: f64) -> Self {
        Self {
            z: z1 + lambda * z2,
            z1,
            z2,
            lambda,
        }
    }
}

/// Mean absolute deviation of per-agent repetition counts, averaged over
/// tasks and agents.
///
/// Counts include the agents' completed repetitions. Only agents able to
/// perform a task take part in its mean and deviations.
pub fn entropy_term(schedule: &Schedule, instance: &ProblemInstance) -> f64 {
    let n_t = instance.tasks.len();
    let n_a = instance.agents.len();
    if n_t == 0 || n_a == 0 {
        return 0.0;
    }
    let mut assigned: BTreeMap<(&str, &str), u32> = BTreeMap::new();
    for (r, a) in &schedule.assignment {
        *assigned.entry((r.task.as_str(), a.as_str())).or_default() += 1;
    }
    let total: f64 = instance
        .tasks
        .iter()
        .map(|t| {
            let counts: Vec<f64> = instance
                .agents
                .iter()
                .filter(|a| a.curve_prior.contains_key(&t.task_id))
                .map(|a| {
                    let now = assigned.get(&(t.task_id.as_str(), a.agent_id.as_str())).copied().unwrap_or(0);
                    f64::from(a.reps(&t.task_id) + now)
                })
                .collect();
            mean_abs_deviation_sum(&counts)
        })
        .sum();
    total / (n_t * n_a) as f64
}

fn mean_abs_deviation_sum(counts: &[f64]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    counts.iter().map(|c| (c - mean).abs()).sum()
}

/// Objective of a schedule together with its robustness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: ObjectiveValue,
    pub report: RobustnessReport,
    pub propagation: PropagationResult,
}

impl Evaluation {
    /// Non-robust schedules are infeasible and never preferred to robust ones.
    pub fn feasible(&self) -> bool {
        self.report.robust
    }
}

/// Scores `schedule` with durations projected from the agents' curves.
pub fn objective(
    schedule: &Schedule,
    instance: &ProblemInstance,
    projections: &Projections,
    lambda: f64,
) -> Result<Evaluation> {
    let layout = Layout::new(instance)?;
    let plan = layout.plan_from_schedule(schedule)?;
    let order = layout.order(&plan)?;
    let durations = projections.plan_durations(&layout, &plan);
    let cfg = BoundConfig::default();
    let p = propagate_plan(&layout, &plan, &order, &durations, &cfg);
    let propagation = PropagationResult::from_dense(&layout, &p);
    let report = check_robustness_with(&propagation, instance, &allocate_risk(instance), &cfg);
    Ok(Evaluation {
        objective: ObjectiveValue::new(p.makespan.mean, entropy_term(schedule, instance), lambda),
        report,
        propagation,
    })
}

/// Fast scoring of dense plans inside the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub objective: ObjectiveValue,
    pub failed: usize,
}

impl Score {
    pub fn robust(&self) -> bool {
        self.failed == 0
    }

    /// Robust first, then fewest failed deadlines, then lowest `z`.
    pub fn rank(&self, other: &Self) -> Ordering {
        self.failed
            .cmp(&other.failed)
            .then(self.objective.z.total_cmp(&other.objective.z))
    }
}

pub(crate) struct Evaluator<'a> {
    pub layout: &'a Layout,
    pub projections: &'a Projections,
    shares: Vec<f64>,
    bound: BoundConfig,
    lambda: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        instance: &ProblemInstance,
        layout: &'a Layout,
        projections: &'a Projections,
        lambda: f64,
        bound: BoundConfig,
    ) -> Self {
        let alloc = allocate_risk(instance);
        let shares = layout
            .deadlines
            .iter()
            .map(|d| alloc.get(&d.reference).unwrap_or(0.0))
            .collect();
        Self {
            layout,
            projections,
            shares,
            bound,
            lambda,
        }
    }

    pub fn score(&self, plan: &Plan) -> Result<Score> {
        let order = self.layout.order(plan)?;
        let durations = self.projections.plan_durations(self.layout, plan);
        let p = propagate_plan(self.layout, plan, &order, &durations, &self.bound);
        let failed = check_deadlines(self.layout, &p.start, &p.finish, &self.shares, &self.bound)
            .iter()
            .filter(|c| !c.pass)
            .count();
        Ok(Score {
            objective: ObjectiveValue::new(p.makespan.mean, self.entropy(plan), self.lambda),
            failed,
        })
    }

    fn entropy(&self, plan: &Plan) -> f64 {
        let l = self.layout;
        let (n_t, n_a) = (l.task_ids.len(), l.agents.len());
        if n_t == 0 || n_a == 0 {
            return 0.0;
        }
        let mut counts = vec![vec![0u32; n_a]; n_t];
        for (a, order) in plan.orders.iter().enumerate() {
            for &i in order {
                counts[l.task_of[i]][a] += 1;
            }
        }
        let mut total = 0.0;
        let mut buf = Vec::with_capacity(n_a);
        for (t, row) in counts.iter().enumerate() {
            buf.clear();
            buf.extend(
                (0..n_a)
                    .filter(|&a| l.capable[a][t])
                    .map(|a| f64::from(self.projections.base_reps(a, t) + row[a])),
            );
            total += mean_abs_deviation_sum(&buf);
        }
        total / (n_t * n_a) as f64
    }
}
