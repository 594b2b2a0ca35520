//! Problem instances, schedules and their validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gaussian::GaussianDist;
use crate::learning::KalmanState;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(TaskId);
string_id!(AgentId);

/// The `n`-th iteration (from 1) of a task.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IterRef {
    pub task: TaskId,
    pub n: u32,
}

impl IterRef {
    pub fn new(task: impl Into<TaskId>, n: u32) -> Self {
        Self {
            task: task.into(),
            n,
        }
    }
}

impl fmt::Display for IterRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.task, self.n)
    }
}

/// Every iteration of the owning task starts at least `wait` seconds after
/// `after` finishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precondition {
    pub after: IterRef,
    #[serde(default)]
    pub wait: f64,
}

/// Iteration `to` must finish within `budget` seconds of the start of
/// iteration `from_n` of the owning task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelDeadline {
    #[serde(default = "first_iteration")]
    pub from_n: u32,
    pub to: IterRef,
    pub budget: f64,
}

fn first_iteration() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: TaskId,
    pub iterations: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_lb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ub: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preconditions: Vec<Precondition>,
    /// Every iteration of the task must finish by this time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_deadline: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rel_deadlines: Vec<RelDeadline>,
}

impl TaskSpec {
    pub fn new(task_id: impl Into<TaskId>, iterations: u32) -> Self {
        Self {
            task_id: task_id.into(),
            iterations,
            duration_lb: None,
            duration_ub: None,
            preconditions: Vec::new(),
            abs_deadline: None,
            rel_deadlines: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Human,
    Robot,
}

/// An agent can perform a task iff it has a curve for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: AgentId,
    pub kind: AgentKind,
    #[serde(default)]
    pub curve_prior: BTreeMap<TaskId, KalmanState>,
    #[serde(default)]
    pub completed_reps: BTreeMap<TaskId, u32>,
}

impl AgentSpec {
    pub fn reps(&self, task: &TaskId) -> u32 {
        self.completed_reps.get(task).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub tasks: Vec<TaskSpec>,
    pub agents: Vec<AgentSpec>,
    pub epsilon: f64,
    /// Schedule-level deadline applied to every sink iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_budget: Option<f64>,
}

impl ProblemInstance {
    pub fn task(&self, id: &TaskId) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| &t.task_id == id)
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| &a.agent_id == id)
    }

    pub fn agent_mut(&mut self, id: &AgentId) -> Option<&mut AgentSpec> {
        self.agents.iter_mut().find(|a| &a.agent_id == id)
    }

    pub fn iteration_refs(&self) -> Vec<IterRef> {
        self.tasks
            .iter()
            .flat_map(|t| (1..=t.iterations).map(|n| IterRef::new(t.task_id.clone(), n)))
            .collect()
    }
}

/// Agent assignment plus a total order of work per agent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(with = "assignment_list")]
    pub assignment: BTreeMap<IterRef, AgentId>,
    pub agent_orders: BTreeMap<AgentId, Vec<IterRef>>,
}

impl Schedule {
    /// Builds a schedule from per-agent orders; the assignment follows.
    pub fn from_orders(agent_orders: BTreeMap<AgentId, Vec<IterRef>>) -> Self {
        let assignment = agent_orders
            .iter()
            .flat_map(|(a, refs)| refs.iter().map(move |r| (r.clone(), a.clone())))
            .collect();
        Self {
            assignment,
            agent_orders,
        }
    }
}

mod assignment_list {
    use super::{AgentId, IterRef};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        iter: IterRef,
        agent: AgentId,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<IterRef, AgentId>, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = map
            .iter()
            .map(|(iter, agent)| Entry {
                iter: iter.clone(),
                agent: agent.clone(),
            })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<IterRef, AgentId>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for e in entries {
            if map.insert(e.iter.clone(), e.agent).is_some() {
                return Err(serde::de::Error::custom(format!("iteration {} assigned twice", e.iter)));
            }
        }
        Ok(map)
    }
}

/// A chance-constrained deadline.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeadlineRef {
    Absolute { task: TaskId },
    Relative { from: IterRef, to: IterRef },
    TimeBudget,
}

impl fmt::Display for DeadlineRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeadlineRef::Absolute { task } => write!(f, "abs({task})"),
            DeadlineRef::Relative { from, to } => write!(f, "rel({from}->{to})"),
            DeadlineRef::TimeBudget => f.write_str("time_budget"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadlineCheck {
    pub deadline: DeadlineRef,
    /// Deadline value in seconds (budget for relative deadlines).
    pub bound: f64,
    pub epsilon: f64,
    /// Satisfaction probability under the upper-bound distribution.
    pub probability: f64,
    /// `bound − (mean + Φ⁻¹(1−ε)·σ)`; non-negative iff the check passes.
    pub margin: f64,
    pub pass: bool,
}

/// Iteration whose duration exceeds its upper bound too often.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationFlag {
    pub iter: IterRef,
    pub ub: f64,
    pub exceed_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub per_deadline: Vec<DeadlineCheck>,
    pub makespan_ub: GaussianDist,
    pub robust: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub duration_flags: Vec<DurationFlag>,
}

impl RobustnessReport {
    pub fn failed(&self) -> usize {
        self.per_deadline.iter().filter(|d| !d.pass).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EpsilonOutOfRange { epsilon: f64 },
    NoAgents,
    DuplicateTask { task: TaskId },
    DuplicateAgent { agent: AgentId },
    ZeroIterations { task: TaskId },
    BoundsInverted { task: TaskId, lb: f64, ub: f64 },
    NegativeValue { field: String, value: f64 },
    DanglingReference { from: String, target: String },
    PrecedenceCycle { involving: Vec<IterRef> },
    RobotNotFixed { agent: AgentId, task: TaskId },
    NoCapableAgent { task: TaskId },
    Unassigned { iter: IterRef },
    AssignmentMismatch { iter: IterRef },
    IncapableAgent { agent: AgentId, task: TaskId },
    ScheduleCycle,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EpsilonOutOfRange { epsilon } => write!(f, "epsilon out of range: {epsilon} not in (0, 1)"),
            Violation::NoAgents => f.write_str("no agents"),
            Violation::DuplicateTask { task } => write!(f, "duplicate task id {task}"),
            Violation::DuplicateAgent { agent } => write!(f, "duplicate agent id {agent}"),
            Violation::ZeroIterations { task } => write!(f, "task {task} has zero iterations"),
            Violation::BoundsInverted { task, lb, ub } => write!(f, "lb > ub for task {task}: {lb} > {ub}"),
            Violation::NegativeValue { field, value } => write!(f, "negative value {value} for {field}"),
            Violation::DanglingReference { from, target } => write!(f, "dangling reference from {from} to {target}"),
            Violation::PrecedenceCycle { involving } => {
                write!(f, "precedence cycle through")?;
                for r in involving {
                    write!(f, " {r}")?;
                }
                Ok(())
            }
            Violation::RobotNotFixed { agent, task } => {
                write!(f, "robot {agent} has a non-constant or noisy curve for {task}")
            }
            Violation::NoCapableAgent { task } => write!(f, "no agent can perform task {task}"),
            Violation::Unassigned { iter } => write!(f, "iteration {iter} is not scheduled exactly once"),
            Violation::AssignmentMismatch { iter } => {
                write!(f, "iteration {iter} is ordered under a different agent than assigned")
            }
            Violation::IncapableAgent { agent, task } => write!(f, "agent {agent} cannot perform task {task}"),
            Violation::ScheduleCycle => f.write_str("precedence and agent orders form a cycle"),
        }
    }
}

pub type ValidationResult = Result<(), Vec<Violation>>;

/// Checks an instance for structural problems without modifying it.
pub fn validate_instance(instance: &ProblemInstance) -> ValidationResult {
    let mut out = Vec::new();

    if !(instance.epsilon > 0.0 && instance.epsilon < 1.0) {
        out.push(Violation::EpsilonOutOfRange {
            epsilon: instance.epsilon,
        });
    }
    if instance.agents.is_empty() {
        out.push(Violation::NoAgents);
    }
    if let Some(b) = instance.time_budget {
        if !(b >= 0.0) {
            out.push(Violation::NegativeValue {
                field: "time_budget".into(),
                value: b,
            });
        }
    }

    let mut iterations: HashMap<&TaskId, u32> = HashMap::new();
    for t in &instance.tasks {
        if iterations.insert(&t.task_id, t.iterations).is_some() {
            out.push(Violation::DuplicateTask {
                task: t.task_id.clone(),
            });
        }
    }
    let mut seen_agents = HashSet::new();
    for a in &instance.agents {
        if !seen_agents.insert(&a.agent_id) {
            out.push(Violation::DuplicateAgent {
                agent: a.agent_id.clone(),
            });
        }
    }
    let resolves = |r: &IterRef| iterations.get(&r.task).is_some_and(|&n| r.n >= 1 && r.n <= n);

    for t in &instance.tasks {
        let id = &t.task_id;
        if t.iterations == 0 {
            out.push(Violation::ZeroIterations { task: id.clone() });
        }
        for (field, v) in [("duration_lb", t.duration_lb), ("duration_ub", t.duration_ub)] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    out.push(Violation::NegativeValue {
                        field: format!("{id}.{field}"),
                        value: v,
                    });
                }
            }
        }
        if let (Some(lb), Some(ub)) = (t.duration_lb, t.duration_ub) {
            if lb > ub {
                out.push(Violation::BoundsInverted {
                    task: id.clone(),
                    lb,
                    ub,
                });
            }
        }
        if let Some(d) = t.abs_deadline {
            if !(d >= 0.0) {
                out.push(Violation::NegativeValue {
                    field: format!("{id}.abs_deadline"),
                    value: d,
                });
            }
        }
        for p in &t.preconditions {
            if !(p.wait >= 0.0) {
                out.push(Violation::NegativeValue {
                    field: format!("{id}.wait"),
                    value: p.wait,
                });
            }
            if !resolves(&p.after) {
                out.push(Violation::DanglingReference {
                    from: id.to_string(),
                    target: p.after.to_string(),
                });
            }
        }
        for rd in &t.rel_deadlines {
            if rd.from_n == 0 || rd.from_n > t.iterations {
                out.push(Violation::DanglingReference {
                    from: id.to_string(),
                    target: IterRef::new(id.clone(), rd.from_n).to_string(),
                });
            }
            if !resolves(&rd.to) {
                out.push(Violation::DanglingReference {
                    from: id.to_string(),
                    target: rd.to.to_string(),
                });
            }
            if !(rd.budget >= 0.0) {
                out.push(Violation::NegativeValue {
                    field: format!("{id}.rel_deadline.budget"),
                    value: rd.budget,
                });
            }
        }
    }

    for a in &instance.agents {
        for task in a.curve_prior.keys().chain(a.completed_reps.keys()) {
            if !iterations.contains_key(task) {
                out.push(Violation::DanglingReference {
                    from: a.agent_id.to_string(),
                    target: task.to_string(),
                });
            }
        }
        if a.kind == AgentKind::Robot {
            for (task, s) in &a.curve_prior {
                let p_zero = s.p.iter().flatten().all(|v| *v == 0.0);
                if s.x.k != 0.0 || s.residual_std != 0.0 || s.r != 0.0 || !p_zero {
                    out.push(Violation::RobotNotFixed {
                        agent: a.agent_id.clone(),
                        task: task.clone(),
                    });
                }
            }
        }
    }
    for t in &instance.tasks {
        if !instance.agents.iter().any(|a| a.curve_prior.contains_key(&t.task_id)) {
            out.push(Violation::NoCapableAgent {
                task: t.task_id.clone(),
            });
        }
    }

    // Cycle detection only makes sense once references resolve.
    if out.is_empty() {
        if let Some(cycle) = precedence_cycle(instance) {
            out.push(Violation::PrecedenceCycle { involving: cycle });
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Iterations left unsorted by Kahn's algorithm over precedence edges.
fn precedence_cycle(instance: &ProblemInstance) -> Option<Vec<IterRef>> {
    let refs = instance.iteration_refs();
    let index: HashMap<&IterRef, usize> = refs.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let mut indeg = vec![0usize; refs.len()];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); refs.len()];
    for t in &instance.tasks {
        for n in 1..=t.iterations {
            let me = index[&IterRef::new(t.task_id.clone(), n)];
            for p in &t.preconditions {
                let from = *index.get(&p.after)?;
                succ[from].push(me);
                indeg[me] += 1;
            }
        }
    }
    let mut stack: Vec<usize> = (0..refs.len()).filter(|&i| indeg[i] == 0).collect();
    let mut done = 0;
    while let Some(i) = stack.pop() {
        done += 1;
        for &s in &succ[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                stack.push(s);
            }
        }
    }
    if done == refs.len() {
        None
    } else {
        Some(
            (0..refs.len())
                .filter(|&i| indeg[i] > 0)
                .map(|i| refs[i].clone())
                .collect(),
        )
    }
}

/// Checks a schedule against an instance that already validates.
pub fn validate_schedule(instance: &ProblemInstance, schedule: &Schedule) -> ValidationResult {
    let mut out = Vec::new();
    let refs: BTreeSet<IterRef> = instance.iteration_refs().into_iter().collect();

    for r in &refs {
        if !schedule.assignment.contains_key(r) {
            out.push(Violation::Unassigned { iter: r.clone() });
        }
    }
    for (r, agent) in &schedule.assignment {
        if !refs.contains(r) {
            out.push(Violation::DanglingReference {
                from: "assignment".into(),
                target: r.to_string(),
            });
            continue;
        }
        match instance.agent(agent) {
            None => out.push(Violation::DanglingReference {
                from: r.to_string(),
                target: agent.to_string(),
            }),
            Some(a) if !a.curve_prior.contains_key(&r.task) => out.push(Violation::IncapableAgent {
                agent: agent.clone(),
                task: r.task.clone(),
            }),
            Some(_) => {}
        }
    }
    let mut ordered: HashMap<&IterRef, usize> = HashMap::new();
    for (agent, order) in &schedule.agent_orders {
        if instance.agent(agent).is_none() {
            out.push(Violation::DanglingReference {
                from: "agent_orders".into(),
                target: agent.to_string(),
            });
        }
        for r in order {
            *ordered.entry(r).or_default() += 1;
            if schedule.assignment.get(r) != Some(agent) {
                out.push(Violation::AssignmentMismatch { iter: r.clone() });
            }
        }
    }
    for r in &refs {
        if ordered.get(r).copied().unwrap_or(0) != 1 {
            out.push(Violation::Unassigned { iter: r.clone() });
        }
    }
    out.dedup();

    if out.is_empty() {
        let layout = crate::layout::Layout::new(instance).expect("instance validated");
        match layout.plan_from_schedule(schedule) {
            Ok(plan) => {
                if layout.order(&plan).is_err() {
                    out.push(Violation::ScheduleCycle);
                }
            }
            Err(_) => out.push(Violation::ScheduleCycle),
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
