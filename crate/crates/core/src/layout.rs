//! Dense integer indexing of an instance, shared by the evaluators and the
//! search.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::model::{AgentId, DeadlineRef, IterRef, ProblemInstance, Schedule, TaskId};

/// What a deadline constrains.
#[derive(Debug, Clone, PartialEq)]
pub enum DeadlineTarget {
    /// Finish of every listed iteration.
    Finish(Vec<usize>),
    /// Finish of `end` measured from the start of `anchor`.
    Span { anchor: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledDeadline {
    pub reference: DeadlineRef,
    pub bound: f64,
    pub target: DeadlineTarget,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub iters: Vec<IterRef>,
    index: HashMap<IterRef, usize>,
    pub task_ids: Vec<TaskId>,
    pub task_of: Vec<usize>,
    pub task_iters: Vec<Vec<usize>>,
    /// Precedence predecessors with their wait.
    pub preds: Vec<Vec<(usize, f64)>>,
    pub succs: Vec<Vec<usize>>,
    pub lb: Vec<Option<f64>>,
    pub ub: Vec<Option<f64>>,
    pub agents: Vec<AgentId>,
    agent_index: HashMap<AgentId, usize>,
    /// `capable[agent][task]`.
    pub capable: Vec<Vec<bool>>,
    pub deadlines: Vec<CompiledDeadline>,
}

/// Per-agent orders over iteration indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plan {
    pub orders: Vec<Vec<usize>>,
}

/// Evaluation order of a plan.
#[derive(Debug, Clone)]
pub struct PlanOrder {
    pub topo: Vec<usize>,
    pub prev: Vec<Option<usize>>,
    pub agent_of: Vec<usize>,
}

impl Layout {
    pub fn new(instance: &ProblemInstance) -> Result<Self> {
        let iters = instance.iteration_refs();
        let index: HashMap<IterRef, usize> = iters.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
        let task_ids: Vec<TaskId> = instance.tasks.iter().map(|t| t.task_id.clone()).collect();
        let lookup = |r: &IterRef| index.get(r).copied().ok_or_else(|| Error::UnknownIteration(r.clone()));

        let n = iters.len();
        let mut task_of = vec![0; n];
        let mut task_iters = vec![Vec::new(); task_ids.len()];
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        let mut lb = vec![None; n];
        let mut ub = vec![None; n];
        for (ti, t) in instance.tasks.iter().enumerate() {
            for k in 1..=t.iterations {
                let me = index[&IterRef::new(t.task_id.clone(), k)];
                task_of[me] = ti;
                task_iters[ti].push(me);
                lb[me] = t.duration_lb;
                ub[me] = t.duration_ub;
                for p in &t.preconditions {
                    let from = lookup(&p.after)?;
                    preds[me].push((from, p.wait));
                    succs[from].push(me);
                }
            }
        }

        let agents: Vec<AgentId> = instance.agents.iter().map(|a| a.agent_id.clone()).collect();
        let agent_index = agents.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let capable = instance
            .agents
            .iter()
            .map(|a| task_ids.iter().map(|t| a.curve_prior.contains_key(t)).collect())
            .collect();

        let mut deadlines = Vec::new();
        for (ti, t) in instance.tasks.iter().enumerate() {
            if let Some(d) = t.abs_deadline {
                deadlines.push(CompiledDeadline {
                    reference: DeadlineRef::Absolute { task: t.task_id.clone() },
                    bound: d,
                    target: DeadlineTarget::Finish(task_iters[ti].clone()),
                });
            }
        }
        for t in &instance.tasks {
            for rd in &t.rel_deadlines {
                let from = IterRef::new(t.task_id.clone(), rd.from_n);
                deadlines.push(CompiledDeadline {
                    reference: DeadlineRef::Relative {
                        from: from.clone(),
                        to: rd.to.clone(),
                    },
                    bound: rd.budget,
                    target: DeadlineTarget::Span {
                        anchor: lookup(&from)?,
                        end: lookup(&rd.to)?,
                    },
                });
            }
        }
        if let Some(budget) = instance.time_budget {
            let sinks = (0..n).filter(|&i| succs[i].is_empty()).collect();
            deadlines.push(CompiledDeadline {
                reference: DeadlineRef::TimeBudget,
                bound: budget,
                target: DeadlineTarget::Finish(sinks),
            });
        }

        Ok(Self {
            iters,
            index,
            task_ids,
            task_of,
            task_iters,
            preds,
            succs,
            lb,
            ub,
            agents,
            agent_index,
            capable,
            deadlines,
        })
    }

    pub fn len(&self) -> usize {
        self.iters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    pub fn index_of(&self, r: &IterRef) -> Option<usize> {
        self.index.get(r).copied()
    }

    pub fn agent_of_id(&self, a: &AgentId) -> Option<usize> {
        self.agent_index.get(a).copied()
    }

    pub fn can(&self, agent: usize, iter: usize) -> bool {
        self.capable[agent][self.task_of[iter]]
    }

    pub fn plan_from_schedule(&self, schedule: &Schedule) -> Result<Plan> {
        let mut orders = vec![Vec::new(); self.agents.len()];
        for (agent, refs) in &schedule.agent_orders {
            let a = self.agent_of_id(agent).ok_or_else(|| Error::UnknownAgent(agent.clone()))?;
            for r in refs {
                let i = self.index_of(r).ok_or_else(|| Error::UnknownIteration(r.clone()))?;
                if schedule.assignment.get(r) != Some(agent) {
                    return Err(Error::InvalidSchedule(format!("{r} ordered under {agent} but assigned elsewhere")));
                }
                orders[a].push(i);
            }
        }
        if schedule.assignment.len() != self.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} of {} iterations assigned",
                schedule.assignment.len(),
                self.len()
            )));
        }
        Ok(Plan { orders })
    }

    pub fn schedule_from_plan(&self, plan: &Plan) -> Schedule {
        let orders: BTreeMap<AgentId, Vec<IterRef>> = plan
            .orders
            .iter()
            .enumerate()
            .map(|(a, o)| (self.agents[a].clone(), o.iter().map(|&i| self.iters[i].clone()).collect()))
            .collect();
        Schedule::from_orders(orders)
    }

    /// Topological order of precedence plus agent-sequence edges.
    pub fn order(&self, plan: &Plan) -> Result<PlanOrder> {
        let n = self.len();
        let mut prev = vec![None; n];
        let mut agent_of = vec![usize::MAX; n];
        let mut next = vec![None; n];
        for (a, order) in plan.orders.iter().enumerate() {
            for (pos, &i) in order.iter().enumerate() {
                if i >= n || agent_of[i] != usize::MAX {
                    return Err(Error::InvalidSchedule(format!("iteration index {i} ordered twice or unknown")));
                }
                agent_of[i] = a;
                if pos > 0 {
                    prev[i] = Some(order[pos - 1]);
                    next[order[pos - 1]] = Some(i);
                }
            }
        }
        if let Some(i) = agent_of.iter().position(|&a| a == usize::MAX) {
            return Err(Error::InvalidSchedule(format!("{} is not ordered", self.iters[i])));
        }

        let mut indeg: Vec<usize> = (0..n).map(|i| self.preds[i].len() + usize::from(prev[i].is_some())).collect();
        let mut stack: Vec<usize> = (0..n).rev().filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = stack.pop() {
            topo.push(i);
            for &s in self.succs[i].iter().chain(next[i].iter()) {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    stack.push(s);
                }
            }
        }
        if topo.len() != n {
            return Err(Error::Cycle);
        }
        Ok(PlanOrder { topo, prev, agent_of })
    }
}
