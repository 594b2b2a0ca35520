use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lcsched_core::learning::DurationObservation;
use lcsched_core::scheduler::{SearchConfig, StrategyConfig, StrategyKind};
use lcsched_core::{validate_instance, ProblemInstance};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::session::{plan_round, AgentsDocument, Event, ObservationResponse, ScheduleDocument, Session, SessionSummary};
use crate::store::EventLog;
use crate::{AppState, SessionHandle};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub instance: ProblemInstance,
    /// Defaults to five exploit rounds.
    #[serde(default)]
    pub strategy: Option<StrategyConfig>,
    /// Defaults to the service's search settings.
    #[serde(default)]
    pub search: Option<SearchConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRequest {
    /// Resubmitting a key returns the stored reply without reapplying.
    #[serde(default)]
    pub idempotency_key: Option<String>,
    pub observations: Vec<DurationObservation>,
}

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/schedule", get(get_schedule))
        .route("/sessions/{id}/observations", post(post_observations))
        .route("/sessions/{id}/agents", get(get_agents))
        .layer(middleware::from_fn(log_requests))
        .with_state(state)
}

async fn log_requests(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let started = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        %method,
        path,
        status = resp.status().as_u16(),
        elapsed_ms = started.elapsed().as_secs_f64() * 1e3,
        "request"
    );
    resp
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    let req: CreateSessionRequest = parse(&body)?;
    let mut instance = req.instance;
    state.fill_from_library(&mut instance);
    validate_instance(&instance).map_err(|violations| ServiceError::BadRequest {
        message: format!("instance has {} violation(s)", violations.len()),
        violations,
    })?;
    let strategy = req.strategy.unwrap_or(StrategyConfig::new(StrategyKind::Exploit, 5));
    strategy
        .validate()
        .map_err(|e| ServiceError::bad_request(format!("strategy: {e}")))?;
    let search = req.search.unwrap_or_else(|| state.config().search.clone());
    search
        .validate()
        .map_err(|e| ServiceError::bad_request(format!("search: {e}")))?;

    let session_id = uuid::Uuid::new_v4().simple().to_string();
    let dir = state.sessions_dir().to_path_buf();
    let id = session_id.clone();
    let (session, log) = blocking(move || {
        let plan = plan_round(&instance, &strategy, &search, 1, None)?;
        let events = [
            Event::Created {
                session_id: id.clone(),
                instance,
                strategy,
                search,
            },
            Event::Scheduled { plan },
        ];
        let session = Session::replay(&events)?;
        let mut log = EventLog::create(&dir, &id)?;
        log.append(&events)?;
        Ok((session, log))
    })
    .await?;
    let summary = session.summary().expect("a new session has a plan");
    tracing::info!(%session_id, robust = summary.report.robust, "session created");
    state.insert(
        session_id,
        SessionHandle {
            log: Arc::new(tokio::sync::Mutex::new(log)),
            state: RwLock::new(Arc::new(session)),
        },
    );
    Ok((StatusCode::CREATED, Json::<SessionSummary>(summary)))
}

fn find(state: &AppState, id: &str) -> Result<Arc<SessionHandle>, ServiceError> {
    state.handle(id).ok_or_else(|| ServiceError::NotFound(id.to_owned()))
}

async fn get_schedule(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ScheduleDocument>, ServiceError> {
    let s = find(&state, &id)?.snapshot();
    s.schedule_document()
        .map(Json)
        .ok_or_else(|| ServiceError::Internal(format!("session {id} has no plan")))
}

async fn get_agents(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<AgentsDocument>, ServiceError> {
    Ok(Json(find(&state, &id)?.snapshot().agents_document()))
}

async fn post_observations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ObservationResponse>, ServiceError> {
    let handle = find(&state, &id)?;
    let req: ObservationRequest = parse(&body)?;
    if let Some(o) = req
        .observations
        .iter()
        .find(|o| !(o.observed_duration.is_finite() && o.observed_duration > 0.0))
    {
        return Err(ServiceError::bad_request(format!(
            "observed_duration for {}:{} must be positive and finite",
            o.agent_id, o.task_id
        )));
    }

    let mut log = handle.log.clone().lock_owned().await;
    let current = handle.snapshot();
    if let Some(stored) = req.idempotency_key.as_ref().and_then(|k| current.responses.get(k)) {
        return Ok(Json(stored.clone()));
    }
    if current.completed {
        return Err(ServiceError::Completed(id));
    }
    let plan = current
        .current
        .clone()
        .ok_or_else(|| ServiceError::Internal(format!("session {id} has no plan")))?;
    current.match_observations(&plan, &req.observations)?;

    let observed_round = plan.round;
    let key = req.idempotency_key.clone();
    let mut next = (*current).clone();
    let next = blocking(move || {
        let mut events = vec![Event::Observed {
            round: observed_round,
            idempotency_key: req.idempotency_key,
            observations: req.observations,
        }];
        next.apply(&events[0])?;
        if !next.completed {
            let plan = plan_round(
                &next.instance,
                &next.strategy,
                &next.search,
                next.round_index,
                next.previous_schedule(),
            )?;
            let e = Event::Scheduled { plan };
            next.apply(&e)?;
            events.push(e);
        }
        log.append(&events)?;
        Ok(next)
    })
    .await?;
    let reply = match &key {
        Some(k) => next.responses[k].clone(),
        None => next.observation_response(observed_round),
    };
    tracing::info!(session_id = %id, observed_round, completed = next.completed, "round observed");
    handle.replace(next);
    Ok(Json(reply))
}
