use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bound::{max_gaussian_ub_with, BoundConfig};
use crate::error::{Error, Result};
use crate::gaussian::{sum_gaussian, GaussianDist};
use crate::layout::{Layout, Plan, PlanOrder};
use crate::model::{IterRef, ProblemInstance, Schedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    /// Upper-bound distribution of each finish time.
    #[serde(with = "crate::serde_util::iter_map")]
    pub finish: BTreeMap<IterRef, GaussianDist>,
    #[serde(with = "crate::serde_util::iter_map")]
    pub start_mean: BTreeMap<IterRef, f64>,
    /// Durations as used, after the lower-bound floor.
    #[serde(with = "crate::serde_util::iter_map")]
    pub durations: BTreeMap<IterRef, GaussianDist>,
    pub makespan_ub: GaussianDist,
}

/// Dense-index propagation output.
#[derive(Debug, Clone)]
pub(crate) struct PlanPropagation {
    pub start: Vec<GaussianDist>,
    pub finish: Vec<GaussianDist>,
    pub durations: Vec<GaussianDist>,
    pub makespan: GaussianDist,
}

/// Raises the mean to the duration lower bound: the agent holds the
/// station at least that long.
pub(crate) fn floor_duration(d: GaussianDist, lb: Option<f64>) -> GaussianDist {
    match lb {
        Some(lb) if d.mean < lb => GaussianDist::new(lb, d.stddev),
        _ => d,
    }
}

pub(crate) fn propagate_plan(
    layout: &Layout,
    plan: &Plan,
    order: &PlanOrder,
    durations: &[GaussianDist],
    cfg: &BoundConfig,
) -> PlanPropagation {
    let n = layout.len();
    let mut start = vec![GaussianDist::point(0.0); n];
    let mut finish = vec![GaussianDist::point(0.0); n];
    let mut used = vec![GaussianDist::point(0.0); n];
    let mut inputs = Vec::new();
    for &i in &order.topo {
        inputs.clear();
        inputs.extend(layout.preds[i].iter().map(|&(p, wait)| finish[p].shifted(wait)));
        if let Some(p) = order.prev[i] {
            inputs.push(finish[p]);
        }
        start[i] = if inputs.is_empty() {
            GaussianDist::point(0.0)
        } else {
            max_gaussian_ub_with(&inputs, cfg)
        };
        used[i] = floor_duration(durations[i], layout.lb[i]);
        finish[i] = sum_gaussian(start[i], used[i]);
    }
    let lasts: Vec<GaussianDist> = plan.orders.iter().filter_map(|o| o.last()).map(|&i| finish[i]).collect();
    let makespan = if lasts.is_empty() {
        GaussianDist::point(0.0)
    } else {
        max_gaussian_ub_with(&lasts, cfg)
    };
    PlanPropagation {
        start,
        finish,
        durations: used,
        makespan,
    }
}

pub(crate) fn dense_durations(
    layout: &Layout,
    durations: &BTreeMap<IterRef, GaussianDist>,
) -> Result<Vec<GaussianDist>> {
    layout
        .iters
        .iter()
        .map(|r| durations.get(r).copied().ok_or_else(|| Error::MissingDuration(r.clone())))
        .collect()
}

/// Finish-time upper bounds of every iteration and of the makespan.
pub fn propagate(
    instance: &ProblemInstance,
    schedule: &Schedule,
    durations: &BTreeMap<IterRef, GaussianDist>,
) -> Result<PropagationResult> {
    propagate_with(instance, schedule, durations, &BoundConfig::default())
}

pub fn propagate_with(
    instance: &ProblemInstance,
    schedule: &Schedule,
    durations: &BTreeMap<IterRef, GaussianDist>,
    cfg: &BoundConfig,
) -> Result<PropagationResult> {
    let layout = Layout::new(instance)?;
    let plan = layout.plan_from_schedule(schedule)?;
    let order = layout.order(&plan)?;
    let dense = dense_durations(&layout, durations)?;
    let p = propagate_plan(&layout, &plan, &order, &dense, cfg);
    Ok(PropagationResult::from_dense(&layout, &p))
}

impl PropagationResult {
    pub(crate) fn from_dense(layout: &Layout, p: &PlanPropagation) -> Self {
        let by_ref = |v: &[GaussianDist]| layout.iters.iter().cloned().zip(v.iter().copied()).collect();
        Self {
            finish: by_ref(&p.finish),
            start_mean: layout.iters.iter().cloned().zip(p.start.iter().map(|d| d.mean)).collect(),
            durations: by_ref(&p.durations),
            makespan_ub: p.makespan,
        }
    }
}
