//! Session state as a fold over its event log.

use std::collections::{BTreeMap, BTreeSet};

use lcsched_core::learning::{project_duration, CurveParams, DurationObservation};
use lcsched_core::model::DeadlineCheck;
use lcsched_core::rounds::{apply_round, round_slots, RoundSlot};
use lcsched_core::scheduler::{
    evolve_from, objective, strategy_lambda, ObjectiveValue, Projections, SearchConfig,
    StrategyConfig, StrategyKind,
};
use lcsched_core::stochastic::PropagationResult;
use lcsched_core::{AgentId, AgentKind, GaussianDist, IterRef, ProblemInstance, RobustnessReport, Schedule, TaskId};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// One optimized round: the schedule and everything the documents show.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub round: u32,
    pub lambda: f64,
    pub schedule: Schedule,
    pub objective: ObjectiveValue,
    pub report: RobustnessReport,
    pub propagation: PropagationResult,
    pub slots: Vec<RoundSlot>,
    pub generations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        instance: ProblemInstance,
        strategy: StrategyConfig,
        search: SearchConfig,
    },
    Scheduled {
        plan: RoundPlan,
    },
    Observed {
        round: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idempotency_key: Option<String>,
        observations: Vec<DurationObservation>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub plan: RoundPlan,
    pub idempotency_key: Option<String>,
    pub observations: Vec<DurationObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    /// Agent states as the session started.
    pub initial: ProblemInstance,
    /// Agent states after every observed round.
    pub instance: ProblemInstance,
    pub strategy: StrategyConfig,
    pub search: SearchConfig,
    /// Current round, from 1. Stays at the last round once completed.
    pub round_index: u32,
    pub current: Option<RoundPlan>,
    pub history: Vec<RoundRecord>,
    pub completed: bool,
    /// Stored replies to observation submissions, by idempotency key.
    pub responses: BTreeMap<String, ObservationResponse>,
    pending_key: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Explore,
    Exploit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledIteration {
    pub iter: IterRef,
    pub agent_id: AgentId,
    pub agent_kind: AgentKind,
    /// The agent's repetition count for the task at this iteration.
    pub iteration_index: u32,
    pub start_mean: f64,
    pub finish_mean: f64,
    pub finish_stddev: f64,
}

/// One duration the operator must report for the round.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedObservation {
    pub iter: IterRef,
    pub agent_id: AgentId,
    pub task_id: TaskId,
    pub iteration_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub session_id: String,
    pub round: u32,
    pub total_rounds: u32,
    pub completed: bool,
    pub strategy: StrategyKind,
    pub lambda: f64,
    pub mode: Mode,
    pub robust: bool,
    pub objective: ObjectiveValue,
    pub makespan_ub: GaussianDist,
    pub agent_orders: BTreeMap<AgentId, Vec<IterRef>>,
    pub iterations: Vec<ScheduledIteration>,
    pub deadlines: Vec<DeadlineCheck>,
    pub expected_observations: Vec<ExpectedObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedDuration {
    pub round: u32,
    pub iteration_index: u32,
    pub observed_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLearning {
    pub task_id: TaskId,
    pub curve: CurveParams,
    pub residual_std: f64,
    pub completed_reps: u32,
    pub next_iteration: u32,
    pub projected_next: GaussianDist,
    pub observations: Vec<ObservedDuration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLearning {
    pub agent_id: AgentId,
    pub kind: AgentKind,
    pub tasks: Vec<TaskLearning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentsDocument {
    pub session_id: String,
    pub round: u32,
    pub agents: Vec<AgentLearning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub round: u32,
    pub total_rounds: u32,
    pub strategy: StrategyConfig,
    pub lambda: f64,
    pub schedule: ScheduleDocument,
    pub report: RobustnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationResponse {
    pub session_id: String,
    /// The round whose observations were applied.
    pub observed_round: u32,
    pub round: u32,
    pub completed: bool,
    /// The next round's schedule; absent once the session is complete.
    pub schedule: Option<ScheduleDocument>,
    pub agents: AgentsDocument,
}

/// Optimizes one round of `instance`. CPU-bound; callers keep it off the
/// async executor.
pub fn plan_round(
    instance: &ProblemInstance,
    strategy: &StrategyConfig,
    search: &SearchConfig,
    round: u32,
    previous: Option<&Schedule>,
) -> Result<RoundPlan, ServiceError> {
    let lambda = strategy_lambda(strategy, round);
    let projections = Projections::from_instance(instance);
    let cfg = SearchConfig {
        seed: search.seed.wrapping_add(u64::from(round)),
        lambda,
        ..search.clone()
    };
    let unschedulable = |e: lcsched_core::Error| ServiceError::Unschedulable(e.to_string());
    let best = evolve_from(instance, &projections, &cfg, previous.map(std::slice::from_ref).unwrap_or(&[]))
        .map_err(unschedulable)?;
    let eval = objective(&best.best, instance, &projections, lambda).map_err(unschedulable)?;
    Ok(RoundPlan {
        round,
        lambda,
        slots: round_slots(instance, &best.best).map_err(unschedulable)?,
        schedule: best.best,
        objective: eval.objective,
        report: eval.report,
        propagation: eval.propagation,
        generations: best.generations,
        evaluations: best.evaluations,
    })
}

impl Session {
    /// Rebuilds a session from its events.
    pub fn replay(events: &[Event]) -> Result<Self, ServiceError> {
        let mut it = events.iter();
        let mut s = match it.next() {
            Some(Event::Created {
                session_id,
                instance,
                strategy,
                search,
            }) => Self {
                session_id: session_id.clone(),
                initial: instance.clone(),
                instance: instance.clone(),
                strategy: *strategy,
                search: search.clone(),
                round_index: 1,
                current: None,
                history: Vec::new(),
                completed: false,
                responses: BTreeMap::new(),
                pending_key: None,
            },
            _ => return Err(ServiceError::Internal("event log does not start with a creation".into())),
        };
        for e in it {
            s.apply(e)?;
        }
        Ok(s)
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), ServiceError> {
        match event {
            Event::Created { .. } => return Err(ServiceError::Internal("duplicate creation event".into())),
            Event::Scheduled { plan } => {
                if self.completed || plan.round != self.round_index || self.current.is_some() {
                    return Err(ServiceError::Internal(format!("unexpected plan for round {}", plan.round)));
                }
                self.current = Some(plan.clone());
                if let Some(key) = self.pending_key.take() {
                    let reply = self.observation_response(plan.round - 1);
                    self.responses.insert(key, reply);
                }
            }
            Event::Observed {
                round,
                idempotency_key,
                observations,
            } => {
                let plan = match &self.current {
                    Some(p) if p.round == *round && !self.completed => p.clone(),
                    _ => return Err(ServiceError::Internal(format!("unexpected observations for round {round}"))),
                };
                let observed = self.match_observations(&plan, observations)?;
                apply_round(&mut self.instance, &plan.schedule, &observed)
                    .map_err(|e| ServiceError::Internal(e.to_string()))?;
                self.current = None;
                self.history.push(RoundRecord {
                    plan,
                    idempotency_key: idempotency_key.clone(),
                    observations: observations.clone(),
                });
                if *round >= self.strategy.total_rounds {
                    self.completed = true;
                    self.current = self.history.last().map(|r| r.plan.clone());
                    if let Some(key) = idempotency_key {
                        let reply = self.observation_response(*round);
                        self.responses.insert(key.clone(), reply);
                    }
                } else {
                    self.round_index += 1;
                    self.pending_key = idempotency_key.clone();
                }
            }
        }
        Ok(())
    }

    /// True when the log ended between an observation and the next plan.
    pub fn needs_plan(&self) -> bool {
        !self.completed && self.current.is_none()
    }

    pub fn previous_schedule(&self) -> Option<&Schedule> {
        self.history.last().map(|r| &r.plan.schedule)
    }

    pub fn expected(&self, plan: &RoundPlan) -> Vec<ExpectedObservation> {
        plan.slots
            .iter()
            .filter(|s| s.kind == AgentKind::Human)
            .map(|s| ExpectedObservation {
                iter: s.iter.clone(),
                agent_id: s.agent_id.clone(),
                task_id: s.iter.task.clone(),
                iteration_index: s.iteration_index,
            })
            .collect()
    }

    /// Maps submitted observations onto the round's human iterations.
    pub fn match_observations(
        &self,
        plan: &RoundPlan,
        observations: &[DurationObservation],
    ) -> Result<BTreeMap<IterRef, f64>, ServiceError> {
        let expected: BTreeMap<(AgentId, TaskId, u32), IterRef> = self
            .expected(plan)
            .into_iter()
            .map(|e| ((e.agent_id, e.task_id, e.iteration_index), e.iter))
            .collect();
        let mut seen = BTreeSet::new();
        let mut unexpected = Vec::new();
        let mut out = BTreeMap::new();
        for o in observations {
            let key = (o.agent_id.clone(), o.task_id.clone(), o.iteration_index);
            match expected.get(&key) {
                Some(r) if seen.insert(key.clone()) => {
                    out.insert(r.clone(), o.observed_duration);
                }
                _ => unexpected.push(format!("{}:{}@{}", o.agent_id, o.task_id, o.iteration_index)),
            }
        }
        let missing: Vec<String> = expected
            .iter()
            .filter(|(k, _)| !seen.contains(*k))
            .map(|(_, r)| r.to_string())
            .collect();
        if !missing.is_empty() || !unexpected.is_empty() {
            return Err(ServiceError::Mismatch { missing, unexpected });
        }
        Ok(out)
    }

    pub fn schedule_document(&self) -> Option<ScheduleDocument> {
        self.current.as_ref().map(|p| self.document_for(p))
    }

    fn document_for(&self, plan: &RoundPlan) -> ScheduleDocument {
        let kinds: BTreeMap<&AgentId, AgentKind> = self.instance.agents.iter().map(|a| (&a.agent_id, a.kind)).collect();
        let iterations = plan
            .slots
            .iter()
            .map(|s| {
                let finish = plan.propagation.finish[&s.iter];
                ScheduledIteration {
                    iter: s.iter.clone(),
                    agent_id: s.agent_id.clone(),
                    agent_kind: kinds[&s.agent_id],
                    iteration_index: s.iteration_index,
                    start_mean: plan.propagation.start_mean[&s.iter],
                    finish_mean: finish.mean,
                    finish_stddev: finish.stddev,
                }
            })
            .collect();
        ScheduleDocument {
            session_id: self.session_id.clone(),
            round: plan.round,
            total_rounds: self.strategy.total_rounds,
            completed: self.completed,
            strategy: self.strategy.kind,
            lambda: plan.lambda,
            mode: if plan.lambda > 0.0 { Mode::Explore } else { Mode::Exploit },
            robust: plan.report.robust,
            objective: plan.objective,
            makespan_ub: plan.report.makespan_ub,
            agent_orders: plan.schedule.agent_orders.clone(),
            iterations,
            deadlines: plan.report.per_deadline.clone(),
            expected_observations: if self.completed { Vec::new() } else { self.expected(plan) },
        }
    }

    pub fn agents_document(&self) -> AgentsDocument {
        let mut seen: BTreeMap<(&AgentId, &TaskId), Vec<ObservedDuration>> = BTreeMap::new();
        for rec in &self.history {
            for o in &rec.observations {
                seen.entry((&o.agent_id, &o.task_id)).or_default().push(ObservedDuration {
                    round: rec.plan.round,
                    iteration_index: o.iteration_index,
                    observed_duration: o.observed_duration,
                });
            }
        }
        let agents = self
            .instance
            .agents
            .iter()
            .map(|a| AgentLearning {
                agent_id: a.agent_id.clone(),
                kind: a.kind,
                tasks: a
                    .curve_prior
                    .iter()
                    .map(|(t, state)| {
                        let next = a.reps(t) + 1;
                        TaskLearning {
                            task_id: t.clone(),
                            curve: state.x,
                            residual_std: state.residual_std,
                            completed_reps: a.reps(t),
                            next_iteration: next,
                            projected_next: project_duration(state, next),
                            observations: seen.remove(&(&a.agent_id, t)).unwrap_or_default(),
                        }
                    })
                    .collect(),
            })
            .collect();
        AgentsDocument {
            session_id: self.session_id.clone(),
            round: self.round_index,
            agents,
        }
    }

    pub fn summary(&self) -> Option<SessionSummary> {
        let plan = self.current.as_ref()?;
        Some(SessionSummary {
            session_id: self.session_id.clone(),
            round: self.round_index,
            total_rounds: self.strategy.total_rounds,
            strategy: self.strategy,
            lambda: plan.lambda,
            schedule: self.document_for(plan),
            report: plan.report.clone(),
        })
    }

    pub fn observation_response(&self, observed_round: u32) -> ObservationResponse {
        ObservationResponse {
            session_id: self.session_id.clone(),
            observed_round,
            round: self.round_index,
            completed: self.completed,
            schedule: if self.completed { None } else { self.schedule_document() },
            agents: self.agents_document(),
        }
    }
}
