use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Layout, Plan};
use crate::model::{ProblemInstance, Schedule};

pub const DEFAULT_MAX_RETRIES: usize = 100;

/// Relative frequency of each mutation operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationMix {
    /// Move one iteration to another agent.
    pub reassign: f64,
    /// Exchange the agents of two iterations.
    pub swap_agents: f64,
    /// Exchange two neighbours in one agent's order.
    pub swap_adjacent: f64,
}

impl Default for MutationMix {
    fn default() -> Self {
        Self {
            reassign: 0.4,
            swap_agents: 0.3,
            swap_adjacent: 0.3,
        }
    }
}

impl MutationMix {
    pub fn validate(&self) -> Result<()> {
        let w = [self.reassign, self.swap_agents, self.swap_adjacent];
        if w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("mutation weights must be non-negative and not all zero".into()));
        }
        Ok(())
    }
}

/// Applies one random mutation to a valid schedule.
///
/// Candidates whose precedence and agent orders form a cycle are rejected
/// and redrawn. A schedule with no possible move is returned unchanged.
pub fn mutate<R: Rng + ?Sized>(schedule: &Schedule, instance: &ProblemInstance, rng: &mut R) -> Result<Schedule> {
    let layout = Layout::new(instance)?;
    let plan = layout.plan_from_schedule(schedule)?;
    let out = mutate_plan(&layout, &plan, &MutationMix::default(), DEFAULT_MAX_RETRIES, rng)?;
    Ok(layout.schedule_from_plan(&out))
}

pub(crate) fn mutate_plan<R: Rng + ?Sized>(
    layout: &Layout,
    plan: &Plan,
    mix: &MutationMix,
    max_retries: usize,
    rng: &mut R,
) -> Result<Plan> {
    let shared_task = (0..layout.task_ids.len()).any(|t| layout.capable.iter().filter(|c| c[t]).count() >= 2);
    let busy_agents = plan.orders.iter().filter(|o| !o.is_empty()).count();
    let weights = [
        if shared_task { mix.reassign } else { 0.0 },
        if shared_task && busy_agents >= 2 { mix.swap_agents } else { 0.0 },
        if plan.orders.iter().any(|o| o.len() >= 2) { mix.swap_adjacent } else { 0.0 },
    ];
    let Ok(pick) = WeightedIndex::new(weights) else {
        return Ok(plan.clone());
    };

    for _ in 0..max_retries {
        let candidate = match pick.sample(rng) {
            0 => reassign(layout, plan, rng),
            1 => swap_agents(layout, plan, rng),
            _ => swap_adjacent(plan, rng),
        };
        if let Some(c) = candidate {
            if layout.order(&c).is_ok() {
                return Ok(c);
            }
        }
    }
    Err(Error::ExhaustedRetries(max_retries))
}

fn locate(plan: &Plan, i: usize) -> (usize, usize) {
    plan.orders
        .iter()
        .enumerate()
        .find_map(|(a, o)| o.iter().position(|&x| x == i).map(|p| (a, p)))
        .expect("every iteration is ordered")
}

fn reassign<R: Rng + ?Sized>(layout: &Layout, plan: &Plan, rng: &mut R) -> Option<Plan> {
    let i = rng.random_range(0..layout.len());
    let (from, pos) = locate(plan, i);
    let targets: Vec<usize> = (0..layout.agents.len())
        .filter(|&b| b != from && layout.can(b, i))
        .collect();
    if targets.is_empty() {
        return None;
    }
    let to = targets[rng.random_range(0..targets.len())];
    let mut out = plan.clone();
    out.orders[from].remove(pos);
    let at = rng.random_range(0..=out.orders[to].len());
    out.orders[to].insert(at, i);
    Some(out)
}

fn swap_agents<R: Rng + ?Sized>(layout: &Layout, plan: &Plan, rng: &mut R) -> Option<Plan> {
    let i = rng.random_range(0..layout.len());
    let j = rng.random_range(0..layout.len());
    let (a, pi) = locate(plan, i);
    let (b, pj) = locate(plan, j);
    if a == b || !layout.can(b, i) || !layout.can(a, j) {
        return None;
    }
    let mut out = plan.clone();
    out.orders[a][pi] = j;
    out.orders[b][pj] = i;
    Some(out)
}

fn swap_adjacent<R: Rng + ?Sized>(plan: &Plan, rng: &mut R) -> Option<Plan> {
    let eligible: Vec<usize> = (0..plan.orders.len()).filter(|&a| plan.orders[a].len() >= 2).collect();
    let a = eligible[rng.random_range(0..eligible.len())];
    let p = rng.random_range(0..plan.orders[a].len() - 1);
    let mut out = plan.clone();
    out.orders[a].swap(p, p + 1);
    Some(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::learning::{CurveParams, KalmanState};
    use crate::model::{validate_schedule, AgentId, AgentKind, AgentSpec, IterRef, TaskSpec};

    fn instance(n_tasks: usize, agents: &[&str]) -> ProblemInstance {
        let tasks: Vec<TaskSpec> = (0..n_tasks).map(|i| TaskSpec::new(format!("t{i}").as_str(), 1)).collect();
        ProblemInstance {
            agents: agents
                .iter()
                .map(|a| AgentSpec {
                    agent_id: AgentId::from(*a),
                    kind: AgentKind::Robot,
                    curve_prior: tasks
                        .iter()
                        .map(|t| (t.task_id.clone(), KalmanState::fixed(CurveParams::constant(5.0))))
                        .collect(),
                    completed_reps: BTreeMap::new(),
                })
                .collect(),
            tasks,
            epsilon: 0.05,
            time_budget: None,
        }
    }

    #[test]
    fn single_iteration_single_agent_is_unchanged() {
        let inst = instance(1, &["r"]);
        let s = Schedule::from_orders(BTreeMap::from([(AgentId::from("r"), vec![IterRef::new("t0", 1)])]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mutate(&s, &inst, &mut rng).unwrap(), s);
    }

    #[test]
    fn reassign_moves_exactly_one_iteration() {
        let inst = instance(4, &["a", "b"]);
        let layout = Layout::new(&inst).unwrap();
        let plan = Plan {
            orders: vec![vec![0, 1], vec![2, 3]],
        };
        let mix = MutationMix {
            reassign: 1.0,
            swap_agents: 0.0,
            swap_adjacent: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let out = mutate_plan(&layout, &plan, &mix, 100, &mut rng).unwrap();
            let before = layout.schedule_from_plan(&plan);
            let after = layout.schedule_from_plan(&out);
            let moved = before
                .assignment
                .iter()
                .filter(|(r, a)| after.assignment[*r] != **a)
                .count();
            assert_eq!(moved, 1);
            assert!(validate_schedule(&inst, &after).is_ok());
        }
    }
}
