use super::projection::Projections;
use crate::error::{Error, Result};
use crate::layout::{DeadlineTarget, Layout, Plan};
use crate::model::{DeadlineRef, ProblemInstance, Schedule};

/// Earliest-deadline-first list schedule under projected mean durations.
pub fn edf_seed(instance: &ProblemInstance, projections: &Projections) -> Result<Schedule> {
    let layout = Layout::new(instance)?;
    let plan = edf_plan(&layout, projections)?;
    Ok(layout.schedule_from_plan(&plan))
}

/// Deadline each iteration must respect: its own task deadline or the
/// tightest deadline of anything downstream of it. The schedule-wide time
/// budget is left out since it applies to everything equally.
fn effective_deadlines(layout: &Layout) -> Result<Vec<f64>> {
    let n = layout.len();
    let mut eff = vec![f64::INFINITY; n];
    for d in &layout.deadlines {
        if let (DeadlineRef::Absolute { .. }, DeadlineTarget::Finish(targets)) = (&d.reference, &d.target) {
            for &i in targets {
                eff[i] = eff[i].min(d.bound);
            }
        }
    }
    let mut indeg: Vec<usize> = (0..n).map(|i| layout.preds[i].len()).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(i) = stack.pop() {
        topo.push(i);
        for &s in &layout.succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                stack.push(s);
            }
        }
    }
    if topo.len() != n {
        return Err(Error::InfeasiblePrecedence);
    }
    for &i in topo.iter().rev() {
        for &s in &layout.succs[i] {
            eff[i] = eff[i].min(eff[s]);
        }
    }
    Ok(eff)
}

pub(crate) fn edf_plan(layout: &Layout, projections: &Projections) -> Result<Plan> {
    let n = layout.len();
    let n_a = layout.agents.len();
    let eff = effective_deadlines(layout)?;

    let mut waiting: Vec<usize> = (0..n).map(|i| layout.preds[i].len()).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&i| waiting[i] == 0).collect();
    let mut finish = vec![0.0; n];
    let mut available = vec![0.0; n_a];
    let mut done = vec![vec![0u32; layout.task_ids.len()]; n_a];
    let mut orders = vec![Vec::new(); n_a];

    let key = |i: usize| (eff[i], &layout.task_ids[layout.task_of[i]], &layout.iters[i].n);
    for _ in 0..n {
        let (pos, &i) = ready
            .iter()
            .enumerate()
            .min_by(|(_, &x), (_, &y)| {
                let (dx, tx, nx) = key(x);
                let (dy, ty, ny) = key(y);
                dx.total_cmp(&dy).then(tx.cmp(ty)).then(nx.cmp(ny))
            })
            .ok_or(Error::InfeasiblePrecedence)?;
        ready.swap_remove(pos);

        let t = layout.task_of[i];
        let released = layout.preds[i]
            .iter()
            .map(|&(p, wait)| finish[p] + wait)
            .fold(0.0, f64::max);
        let best = (0..n_a)
            .filter(|&a| layout.capable[a][t])
            .map(|a| {
                let rep = projections.base_reps(a, t) + done[a][t] + 1;
                let mut mean = projections.duration(a, t, rep).mean;
                if let Some(lb) = layout.lb[i] {
                    mean = mean.max(lb);
                }
                (a, f64::max(available[a], released) + mean)
            })
            .min_by(|(a, fa), (b, fb)| fa.total_cmp(fb).then(layout.agents[*a].cmp(&layout.agents[*b])));
        let Some((a, f)) = best else {
            return Err(Error::InvalidSchedule(format!(
                "no agent can perform task {}",
                layout.task_ids[t]
            )));
        };
        finish[i] = f;
        available[a] = f;
        done[a][t] += 1;
        orders[a].push(i);

        for &s in &layout.succs[i] {
            waiting[s] -= 1;
            if waiting[s] == 0 {
                ready.push(s);
            }
        }
    }
    Ok(Plan { orders })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::learning::{CurveParams, KalmanState};
    use crate::model::{validate_schedule, AgentId, AgentKind, AgentSpec, IterRef, Precondition, TaskSpec};

    fn instance(tasks: Vec<TaskSpec>, agents: &[&str], dur: f64) -> ProblemInstance {
        let agents = agents
            .iter()
            .map(|a| AgentSpec {
                agent_id: AgentId::from(*a),
                kind: AgentKind::Robot,
                curve_prior: tasks
                    .iter()
                    .map(|t| (t.task_id.clone(), KalmanState::fixed(CurveParams::constant(dur))))
                    .collect(),
                completed_reps: BTreeMap::new(),
            })
            .collect();
        ProblemInstance {
            tasks,
            agents,
            epsilon: 0.05,
            time_budget: None,
        }
    }

    fn with_deadline(id: &str, d: f64) -> TaskSpec {
        let mut t = TaskSpec::new(id, 1);
        t.abs_deadline = Some(d);
        t
    }

    #[test]
    fn earlier_deadline_goes_first() {
        let inst = instance(vec![with_deadline("late", 100.0), with_deadline("early", 50.0)], &["r"], 10.0);
        let s = edf_seed(&inst, &Projections::from_instance(&inst)).unwrap();
        assert_eq!(
            s.agent_orders[&AgentId::from("r")],
            vec![IterRef::new("early", 1), IterRef::new("late", 1)]
        );
    }

    #[test]
    fn ties_go_to_the_smaller_agent_id() {
        let inst = instance(vec![TaskSpec::new("a", 1)], &["r2", "r1"], 10.0);
        let s = edf_seed(&inst, &Projections::from_instance(&inst)).unwrap();
        assert_eq!(s.assignment[&IterRef::new("a", 1)], AgentId::from("r1"));
    }

    #[test]
    fn precedence_beats_deadline_rank() {
        let mut b = with_deadline("b", 20.0);
        b.preconditions.push(Precondition {
            after: IterRef::new("a", 1),
            wait: 0.0,
        });
        let inst = instance(vec![b, with_deadline("c", 15.0), TaskSpec::new("a", 1)], &["r"], 5.0);
        let s = edf_seed(&inst, &Projections::from_instance(&inst)).unwrap();
        let order = &s.agent_orders[&AgentId::from("r")];
        let pos = |t: &str| order.iter().position(|r| r.task.as_str() == t).unwrap();
        assert!(pos("a") < pos("b"));
        // a inherits b's deadline of 20, still behind c at 15
        assert!(pos("c") < pos("a"));
        assert!(validate_schedule(&inst, &s).is_ok());
    }

    #[test]
    fn cyclic_precedence_is_rejected() {
        let mut a = TaskSpec::new("a", 1);
        a.preconditions.push(Precondition {
            after: IterRef::new("b", 1),
            wait: 0.0,
        });
        let mut b = TaskSpec::new("b", 1);
        b.preconditions.push(Precondition {
            after: IterRef::new("a", 1),
            wait: 0.0,
        });
        let inst = instance(vec![a, b], &["r"], 1.0);
        assert_eq!(
            edf_seed(&inst, &Projections::from_instance(&inst)).unwrap_err(),
            Error::InfeasiblePrecedence
        );
    }

    #[test]
    fn spreads_work_across_agents() {
        let tasks = (0..4).map(|i| TaskSpec::new(format!("t{i}").as_str(), 1)).collect();
        let inst = instance(tasks, &["r1", "r2"], 10.0);
        let s = edf_seed(&inst, &Projections::from_instance(&inst)).unwrap();
        assert_eq!(s.agent_orders[&AgentId::from("r1")].len(), 2);
        assert_eq!(s.agent_orders[&AgentId::from("r2")].len(), 2);
    }
}
