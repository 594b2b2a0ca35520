//! Deadline-level risk allocation and chance-constraint checks.

use serde::{Deserialize, Serialize};

use super::bound::{max_gaussian_ub_with, BoundConfig};
use super::propagate::PropagationResult;
use crate::gaussian::{std_normal_quantile, GaussianDist};
use crate::layout::{CompiledDeadline, DeadlineTarget, Layout};
use crate::model::{DeadlineCheck, DeadlineRef, DurationFlag, ProblemInstance, RobustnessReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskShare {
    pub deadline: DeadlineRef,
    pub epsilon: f64,
}

/// Failure budget per deadline; the shares sum to at most the overall ε.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskAllocation {
    pub per_deadline_epsilon: Vec<RiskShare>,
}

impl RiskAllocation {
    pub fn get(&self, d: &DeadlineRef) -> Option<f64> {
        self.per_deadline_epsilon.iter().find(|s| &s.deadline == d).map(|s| s.epsilon)
    }

    pub fn total(&self) -> f64 {
        self.per_deadline_epsilon.iter().map(|s| s.epsilon).sum()
    }

    pub fn len(&self) -> usize {
        self.per_deadline_epsilon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_deadline_epsilon.is_empty()
    }
}

/// Every deadline of the instance, in evaluation order.
pub fn deadline_refs(instance: &ProblemInstance) -> Vec<DeadlineRef> {
    let mut out: Vec<DeadlineRef> = instance
        .tasks
        .iter()
        .filter(|t| t.abs_deadline.is_some())
        .map(|t| DeadlineRef::Absolute { task: t.task_id.clone() })
        .collect();
    for t in &instance.tasks {
        for rd in &t.rel_deadlines {
            out.push(DeadlineRef::Relative {
                from: crate::model::IterRef::new(t.task_id.clone(), rd.from_n),
                to: rd.to.clone(),
            });
        }
    }
    if instance.time_budget.is_some() {
        out.push(DeadlineRef::TimeBudget);
    }
    out
}

/// Splits ε uniformly over the deadlines (Boole's inequality).
pub fn allocate_risk(instance: &ProblemInstance) -> RiskAllocation {
    let refs = deadline_refs(instance);
    let share = uniform_share(instance.epsilon, refs.len());
    RiskAllocation {
        per_deadline_epsilon: refs
            .into_iter()
            .map(|deadline| RiskShare { deadline, epsilon: share })
            .collect(),
    }
}

/// `ε / n`, nudged down until `n` sequential additions stay within `ε`.
fn uniform_share(epsilon: f64, n: usize) -> f64 {
    if n == 0 {
        return epsilon;
    }
    let mut share = epsilon / n as f64;
    while (0..n).fold(0.0, |acc, _| acc + share) > epsilon {
        share = f64::from_bits(share.to_bits() - 1);
    }
    share
}

fn check_one(reference: DeadlineRef, bound: f64, dist: GaussianDist, epsilon: f64) -> DeadlineCheck {
    let threshold = if dist.is_point() {
        dist.mean
    } else if epsilon > 0.0 && epsilon < 1.0 {
        dist.mean + std_normal_quantile(1.0 - epsilon) * dist.stddev
    } else if epsilon >= 1.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    let margin = bound - threshold;
    DeadlineCheck {
        deadline: reference,
        bound,
        epsilon,
        probability: dist.cdf(bound),
        margin,
        pass: margin >= 0.0,
    }
}

/// Distribution compared against a compiled deadline.
pub(crate) fn deadline_distribution(
    d: &CompiledDeadline,
    start: &[GaussianDist],
    finish: &[GaussianDist],
    cfg: &BoundConfig,
) -> GaussianDist {
    match &d.target {
        DeadlineTarget::Finish(targets) if targets.is_empty() => GaussianDist::point(0.0),
        DeadlineTarget::Finish(targets) => {
            let fs: Vec<GaussianDist> = targets.iter().map(|&i| finish[i]).collect();
            max_gaussian_ub_with(&fs, cfg)
        }
        // The span's σ is taken from the end finish alone.
        DeadlineTarget::Span { anchor, end } => {
            GaussianDist::new(finish[*end].mean - start[*anchor].mean, finish[*end].stddev)
        }
    }
}

pub(crate) fn check_deadlines(
    layout: &Layout,
    start: &[GaussianDist],
    finish: &[GaussianDist],
    shares: &[f64],
    cfg: &BoundConfig,
) -> Vec<DeadlineCheck> {
    layout
        .deadlines
        .iter()
        .zip(shares)
        .map(|(d, &eps)| check_one(d.reference.clone(), d.bound, deadline_distribution(d, start, finish, cfg), eps))
        .collect()
}

/// Evaluates every deadline of `instance` against the propagated bounds.
pub fn check_robustness(
    prop: &PropagationResult,
    instance: &ProblemInstance,
    alloc: &RiskAllocation,
) -> RobustnessReport {
    check_robustness_with(prop, instance, alloc, &BoundConfig::default())
}

pub fn check_robustness_with(
    prop: &PropagationResult,
    instance: &ProblemInstance,
    alloc: &RiskAllocation,
    cfg: &BoundConfig,
) -> RobustnessReport {
    let layout = Layout::new(instance).expect("instance must validate before robustness checks");
    let pick = |f: &dyn Fn(&crate::model::IterRef) -> GaussianDist| -> Vec<GaussianDist> {
        layout.iters.iter().map(f).collect()
    };
    let finish = pick(&|r| prop.finish.get(r).copied().unwrap_or(GaussianDist::point(f64::INFINITY)));
    let start = pick(&|r| GaussianDist::point(prop.start_mean.get(r).copied().unwrap_or(0.0)));
    let shares: Vec<f64> = layout
        .deadlines
        .iter()
        .map(|d| alloc.get(&d.reference).unwrap_or(0.0))
        .collect();
    let per_deadline = check_deadlines(&layout, &start, &finish, &shares, cfg);

    let flag_eps = alloc
        .per_deadline_epsilon
        .iter()
        .map(|s| s.epsilon)
        .fold(instance.epsilon, f64::min);
    let duration_flags = layout
        .iters
        .iter()
        .zip(&layout.ub)
        .filter_map(|(r, ub)| {
            let ub = (*ub)?;
            let d = prop.durations.get(r)?;
            let exceed = 1.0 - d.cdf(ub);
            (exceed > flag_eps).then(|| DurationFlag {
                iter: r.clone(),
                ub,
                exceed_probability: exceed,
            })
        })
        .collect();

    RobustnessReport {
        robust: per_deadline.iter().all(|d| d.pass),
        per_deadline,
        makespan_ub: prop.makespan_ub,
        duration_flags,
    }
}
