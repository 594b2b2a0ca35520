use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gaussian::GaussianDist;
use crate::layout::{Layout, Plan};
use crate::learning::{project_duration, KalmanState};
use crate::model::{IterRef, ProblemInstance, Schedule};

/// Predicted duration of any (agent, task, repetition), indexed like
/// [`Layout`].
///
/// The repetition index an iteration runs at depends on the plan: it is
/// the agent's completed repetitions of the task plus its position among
/// that task's iterations in the agent's order.
#[derive(Debug, Clone)]
pub struct Projections {
    states: Vec<Vec<Option<KalmanState>>>,
    base_reps: Vec<Vec<u32>>,
}

impl Projections {
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        let states = instance
            .agents
            .iter()
            .map(|a| instance.tasks.iter().map(|t| a.curve_prior.get(&t.task_id).cloned()).collect())
            .collect();
        let base_reps = instance
            .agents
            .iter()
            .map(|a| instance.tasks.iter().map(|t| a.reps(&t.task_id)).collect())
            .collect();
        Self { states, base_reps }
    }

    pub fn base_reps(&self, agent: usize, task: usize) -> u32 {
        self.base_reps[agent][task]
    }

    /// Duration of the agent's `rep`-th performance of the task (from 1).
    ///
    /// Panics if the agent cannot perform the task.
    pub fn duration(&self, agent: usize, task: usize, rep: u32) -> GaussianDist {
        let state = self.states[agent][task]
            .as_ref()
            .expect("agent is not capable of the task");
        project_duration(state, rep)
    }

    /// Duration of every iteration under `plan`, in layout order.
    pub fn plan_durations(&self, layout: &Layout, plan: &Plan) -> Vec<GaussianDist> {
        let mut out = vec![GaussianDist::point(0.0); layout.len()];
        let mut seen = vec![0u32; layout.task_ids.len()];
        for (a, order) in plan.orders.iter().enumerate() {
            seen.iter_mut().for_each(|s| *s = 0);
            for &i in order {
                let t = layout.task_of[i];
                seen[t] += 1;
                out[i] = self.duration(a, t, self.base_reps[a][t] + seen[t]);
            }
        }
        out
    }
}

/// Repetition index each iteration runs at under `schedule`.
pub fn repetition_indices(instance: &ProblemInstance, schedule: &Schedule) -> Result<BTreeMap<IterRef, u32>> {
    let mut out = BTreeMap::new();
    for (agent_id, order) in &schedule.agent_orders {
        let agent = instance
            .agent(agent_id)
            .ok_or_else(|| Error::UnknownAgent(agent_id.clone()))?;
        let mut seen: BTreeMap<_, u32> = BTreeMap::new();
        for r in order {
            let n = seen.entry(&r.task).or_insert(0);
            *n += 1;
            out.insert(r.clone(), agent.reps(&r.task) + *n);
        }
    }
    Ok(out)
}

/// Projected duration of every iteration of `schedule` from the agents'
/// current curve states.
pub fn schedule_durations(
    instance: &ProblemInstance,
    schedule: &Schedule,
) -> Result<BTreeMap<IterRef, GaussianDist>> {
    let reps = repetition_indices(instance, schedule)?;
    let mut out = BTreeMap::new();
    for (r, agent_id) in &schedule.assignment {
        let agent = instance
            .agent(agent_id)
            .ok_or_else(|| Error::UnknownAgent(agent_id.clone()))?;
        let state = agent.curve_prior.get(&r.task).ok_or_else(|| Error::MissingCurve {
            agent: agent_id.clone(),
            task: r.task.clone(),
        })?;
        let rep = *reps
            .get(r)
            .ok_or_else(|| Error::InvalidSchedule(format!("{r} assigned but never ordered")))?;
        out.insert(r.clone(), project_duration(state, rep));
    }
    Ok(out)
}
