//! Bookkeeping between scheduling rounds: which repetitions a schedule
//! produces and how observed durations feed back into the agents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{kalman_update, DurationObservation};
use crate::model::{AgentId, AgentKind, IterRef, ProblemInstance, Schedule};
use crate::scheduler::repetition_indices;

/// One iteration of a round as executed: who performs it and which of
/// their repetitions of the task it is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSlot {
    pub iter: IterRef,
    pub agent_id: AgentId,
    pub kind: AgentKind,
    pub iteration_index: u32,
}

/// Every iteration of `schedule` in agent order.
pub fn round_slots(instance: &ProblemInstance, schedule: &Schedule) -> Result<Vec<RoundSlot>> {
    let reps = repetition_indices(instance, schedule)?;
    let mut out = Vec::with_capacity(reps.len());
    for (agent_id, order) in &schedule.agent_orders {
        let agent = instance
            .agent(agent_id)
            .ok_or_else(|| Error::UnknownAgent(agent_id.clone()))?;
        for r in order {
            out.push(RoundSlot {
                iter: r.clone(),
                agent_id: agent_id.clone(),
                kind: agent.kind,
                iteration_index: reps[r],
            });
        }
    }
    Ok(out)
}

/// Updates human curves with the observed durations of a finished round
/// and advances every agent's completed repetitions.
///
/// `observed` must hold a positive duration for each human-performed
/// iteration; entries for robot iterations are ignored. Updates run in
/// repetition order within each (agent, task) stream.
pub fn apply_round(
    instance: &mut ProblemInstance,
    schedule: &Schedule,
    observed: &BTreeMap<IterRef, f64>,
) -> Result<Vec<DurationObservation>> {
    let slots = round_slots(instance, schedule)?;
    let mut applied = Vec::new();
    for slot in &slots {
        if slot.kind == AgentKind::Robot {
            continue;
        }
        let d = *observed
            .get(&slot.iter)
            .ok_or_else(|| Error::MissingDuration(slot.iter.clone()))?;
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidSchedule(format!("observed duration {d} for {} is not positive", slot.iter)));
        }
        applied.push(DurationObservation {
            agent_id: slot.agent_id.clone(),
            task_id: slot.iter.task.clone(),
            iteration_index: slot.iteration_index,
            observed_duration: d,
        });
    }
    // Slots are in agent order, so each stream is already ascending.
    for obs in &applied {
        let agent = instance.agent_mut(&obs.agent_id).expect("slot agents exist");
        let state = agent.curve_prior.get_mut(&obs.task_id).ok_or_else(|| Error::MissingCurve {
            agent: obs.agent_id.clone(),
            task: obs.task_id.clone(),
        })?;
        *state = kalman_update(state, obs);
    }
    for slot in &slots {
        let agent = instance.agent_mut(&slot.agent_id).expect("slot agents exist");
        *agent.completed_reps.entry(slot.iter.task.clone()).or_insert(0) += 1;
    }
    Ok(applied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{CurveParams, KalmanState};
    use crate::model::{AgentSpec, TaskSpec};

    fn instance() -> ProblemInstance {
        let prior = KalmanState {
            p: [[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 0.01]],
            ..KalmanState::known(CurveParams::new(10.0, 20.0, 0.5), 1.0)
        };
        ProblemInstance {
            tasks: vec![TaskSpec::new("t", 3)],
            agents: vec![
                AgentSpec {
                    agent_id: "h".into(),
                    kind: AgentKind::Human,
                    curve_prior: BTreeMap::from([("t".into(), prior)]),
                    completed_reps: BTreeMap::new(),
                },
                AgentSpec {
                    agent_id: "r".into(),
                    kind: AgentKind::Robot,
                    curve_prior: BTreeMap::from([("t".into(), KalmanState::fixed(CurveParams::constant(30.0)))]),
                    completed_reps: BTreeMap::new(),
                },
            ],
            epsilon: 0.05,
            time_budget: None,
        }
    }

    fn schedule() -> Schedule {
        Schedule::from_orders(BTreeMap::from([
            ("h".into(), vec![IterRef::new("t", 1), IterRef::new("t", 3)]),
            ("r".into(), vec![IterRef::new("t", 2)]),
        ]))
    }

    #[test]
    fn slots_count_repetitions_per_agent() {
        let slots = round_slots(&instance(), &schedule()).unwrap();
        let idx: Vec<(String, u32)> = slots.iter().map(|s| (s.iter.to_string(), s.iteration_index)).collect();
        assert_eq!(idx, [("t#1".into(), 1), ("t#3".into(), 2), ("t#2".into(), 1)]);
    }

    #[test]
    fn exact_observations_leave_curves_and_count_reps() {
        let mut inst = instance();
        let x = inst.agents[0].curve_prior[&"t".into()].x;
        let obs = BTreeMap::from([
            (IterRef::new("t", 1), x.mean_at(1.0)),
            (IterRef::new("t", 3), x.mean_at(2.0)),
        ]);
        let applied = apply_round(&mut inst, &schedule(), &obs).unwrap();
        assert_eq!(applied.len(), 2);
        assert_eq!(inst.agents[0].curve_prior[&"t".into()].x, x);
        assert_eq!(inst.agents[0].reps(&"t".into()), 2);
        assert_eq!(inst.agents[1].reps(&"t".into()), 1);
    }

    #[test]
    fn missing_human_observation_is_an_error() {
        let mut inst = instance();
        let obs = BTreeMap::from([(IterRef::new("t", 1), 25.0)]);
        assert_eq!(
            apply_round(&mut inst, &schedule(), &obs).unwrap_err(),
            Error::MissingDuration(IterRef::new("t", 3))
        );
    }
}
