use std::path::{Path, PathBuf};

use lcsched_core::gen::{generate, GenConfig, GroundTruth};
use lcsched_core::learning::DurationObservation;
use lcsched_core::{AgentKind, ProblemInstance};
use lcsched_service::session::{AgentsDocument, ObservationResponse, ScheduleDocument, SessionSummary};
use lcsched_service::{app, AppState, ServiceConfig};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

struct Server {
    url: String,
    state: AppState,
    task: tokio::task::JoinHandle<()>,
}

async fn start(data: &Path, library: Option<PathBuf>) -> Server {
    let state = AppState::open(ServiceConfig {
        data_dir: data.into(),
        prior_library: library,
        ..ServiceConfig::default()
    })
    .unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let router = app(state.clone());
    let task = tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    Server { url, state, task }
}

fn team(seed: u64) -> (ProblemInstance, GroundTruth) {
    generate(&GenConfig {
        n_tasks: 6,
        n_agents: 3,
        n_robots: 1,
        seed,
        ..GenConfig::default()
    })
    .unwrap()
}

fn create_body(instance: &ProblemInstance, kind: &str) -> Value {
    json!({
        "instance": instance,
        "strategy": { "kind": kind, "total_rounds": 3 },
        "search": { "population_size": 16, "max_generations": 10, "time_limit_secs": null, "seed": 7 },
    })
}

fn observations(doc: &ScheduleDocument, truth: &GroundTruth) -> Vec<DurationObservation> {
    doc.expected_observations
        .iter()
        .map(|e| DurationObservation {
            agent_id: e.agent_id.clone(),
            task_id: e.task_id.clone(),
            iteration_index: e.iteration_index,
            observed_duration: truth.curve(&e.agent_id, &e.task_id).unwrap().mean_at(f64::from(e.iteration_index)),
        })
        .collect()
}

async fn create(c: &Client, url: &str, body: &Value) -> SessionSummary {
    let r = c.post(format!("{url}/sessions")).json(body).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    r.json().await.unwrap()
}

async fn schedule(c: &Client, url: &str, id: &str) -> ScheduleDocument {
    c.get(format!("{url}/sessions/{id}/schedule")).send().await.unwrap().json().await.unwrap()
}

async fn agents(c: &Client, url: &str, id: &str) -> AgentsDocument {
    c.get(format!("{url}/sessions/{id}/agents")).send().await.unwrap().json().await.unwrap()
}

async fn observe(c: &Client, url: &str, id: &str, key: &str, obs: &[DurationObservation]) -> reqwest::Response {
    c.post(format!("{url}/sessions/{id}/observations"))
        .json(&json!({ "idempotency_key": key, "observations": obs }))
        .send()
        .await
        .unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn session_runs_every_round_then_closes() {
    let dir = tempfile::tempdir().unwrap();
    let srv = start(dir.path(), None).await;
    let c = Client::new();
    let (inst, truth) = team(1);
    let created = create(&c, &srv.url, &create_body(&inst, "annealed")).await;
    let id = created.session_id.clone();
    assert_eq!(created.round, 1);
    assert_eq!(created.lambda, 50.0);

    let mut lambdas = Vec::new();
    for round in 1..=3 {
        let doc = schedule(&c, &srv.url, &id).await;
        assert_eq!(doc.round, round);
        lambdas.push(doc.lambda);
        // Every iteration is scheduled once and every human one is expected.
        assert_eq!(doc.iterations.len(), inst.iteration_refs().len());
        let humans = doc.iterations.iter().filter(|i| i.agent_kind == AgentKind::Human).count();
        assert_eq!(doc.expected_observations.len(), humans);
        let r = observe(&c, &srv.url, &id, &format!("r{round}"), &observations(&doc, &truth)).await;
        assert_eq!(r.status(), StatusCode::OK);
        let reply: ObservationResponse = r.json().await.unwrap();
        assert_eq!(reply.observed_round, round);
        assert_eq!(reply.completed, round == 3);
        assert_eq!(reply.schedule.is_none(), round == 3);
    }
    assert_eq!(lambdas, [50.0, 50.0, 0.0]);

    let doc = schedule(&c, &srv.url, &id).await;
    assert!(doc.completed);
    assert!(doc.expected_observations.is_empty());
    let r = observe(&c, &srv.url, &id, "late", &[]).await;
    assert_eq!(r.status(), StatusCode::GONE);

    // Repetition counts match the iterations each agent was given.
    let session = srv.state.session(&id).unwrap();
    for a in agents(&c, &srv.url, &id).await.agents {
        for t in &a.tasks {
            let done: usize = session
                .history
                .iter()
                .flat_map(|h| &h.plan.slots)
                .filter(|s| s.agent_id == a.agent_id && s.iter.task == t.task_id)
                .count();
            assert_eq!(t.completed_reps as usize, done);
            let reported = if a.kind == AgentKind::Human { done } else { 0 };
            assert_eq!(t.observations.len(), reported);
        }
    }
    srv.task.abort();
}

#[tokio::test(flavor = "multi_thread")]
async fn replayed_key_returns_the_stored_reply() {
    let dir = tempfile::tempdir().unwrap();
    let srv = start(dir.path(), None).await;
    let c = Client::new();
    let (inst, truth) = team(2);
    let id = create(&c, &srv.url, &create_body(&inst, "exploit")).await.session_id;
    let doc = schedule(&c, &srv.url, &id).await;
    let obs = observations(&doc, &truth);
    let first: Value = observe(&c, &srv.url, &id, "k1", &obs).await.json().await.unwrap();
    let before = srv.state.session(&id).unwrap();
    let second = observe(&c, &srv.url, &id, "k1", &obs).await;
    assert_eq!(second.status(), StatusCode::OK);
    assert_eq!(second.json::<Value>().await.unwrap(), first);
    assert_eq!(srv.state.session(&id).unwrap(), before);
    assert_eq!(before.history.len(), 1);
    srv.task.abort();
}

#[tokio::test(flavor = "multi_thread")]
async fn mismatched_observations_are_rejected_with_details() {
    let dir = tempfile::tempdir().unwrap();
    let srv = start(dir.path(), None).await;
    let c = Client::new();
    let (inst, truth) = team(3);
    let id = create(&c, &srv.url, &create_body(&inst, "exploit")).await.session_id;
    let doc = schedule(&c, &srv.url, &id).await;
    let mut obs = observations(&doc, &truth);
    assert!(!obs.is_empty());
    let dropped = obs.pop().unwrap();
    obs.push(DurationObservation {
        iteration_index: 99,
        ..dropped.clone()
    });
    let r = observe(&c, &srv.url, &id, "bad", &obs).await;
    assert_eq!(r.status(), StatusCode::CONFLICT);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["missing"].as_array().unwrap().len(), 1);
    assert_eq!(body["unexpected"].as_array().unwrap().len(), 1);

    obs.pop();
    obs.push(DurationObservation {
        observed_duration: -1.0,
        ..dropped
    });
    let r = observe(&c, &srv.url, &id, "neg", &obs).await;
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    assert!(srv.state.session(&id).unwrap().history.is_empty());
    srv.task.abort();
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_requests_get_client_errors() {
    let dir = tempfile::tempdir().unwrap();
    let srv = start(dir.path(), None).await;
    let c = Client::new();
    let r = c
        .post(format!("{}/sessions", srv.url))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let (mut inst, _) = team(4);
    inst.epsilon = 2.0;
    let r = c.post(format!("{}/sessions", srv.url)).json(&create_body(&inst, "exploit")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let body: Value = r.json().await.unwrap();
    assert!(!body["violations"].as_array().unwrap().is_empty());

    let r = c.get(format!("{}/sessions/nope/schedule", srv.url)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    srv.task.abort();
}

#[tokio::test(flavor = "multi_thread")]
async fn restart_restores_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let srv = start(dir.path(), None).await;
    let c = Client::new();
    let (inst, truth) = team(5);
    let id = create(&c, &srv.url, &create_body(&inst, "explore_exploit")).await.session_id;
    let doc = schedule(&c, &srv.url, &id).await;
    observe(&c, &srv.url, &id, "a", &observations(&doc, &truth)).await;
    let sched = schedule(&c, &srv.url, &id).await;
    let ags = agents(&c, &srv.url, &id).await;
    let state = srv.state.session(&id).unwrap();
    srv.task.abort();

    let srv = start(dir.path(), None).await;
    assert_eq!(srv.state.session(&id).unwrap(), state);
    assert_eq!(schedule(&c, &srv.url, &id).await, sched);
    assert_eq!(agents(&c, &srv.url, &id).await, ags);
    // The key survives the restart too.
    let r = observe(&c, &srv.url, &id, "a", &observations(&doc, &truth)).await;
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(srv.state.session(&id).unwrap().history.len(), 1);
    srv.task.abort();
}

#[tokio::test(flavor = "multi_thread")]
async fn torn_final_write_is_dropped_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let srv = start(dir.path(), None).await;
    let c = Client::new();
    let (inst, _) = team(6);
    let id = create(&c, &srv.url, &create_body(&inst, "exploit")).await.session_id;
    let state = srv.state.session(&id).unwrap();
    srv.task.abort();

    let log = dir.path().join("sessions").join(format!("{id}.jsonl"));
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{\"event\":\"observed\",\"rou");
    std::fs::write(&log, text).unwrap();
    let srv = start(dir.path(), None).await;
    assert_eq!(srv.state.session(&id).unwrap(), state);
    srv.task.abort();
}

#[tokio::test(flavor = "multi_thread")]
async fn library_fills_missing_human_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (mut inst, _) = team(7);
    let human = inst.agents.iter().position(|a| a.kind == AgentKind::Human).unwrap();
    let task = inst.tasks[0].task_id.clone();
    let prior = inst.agents[human].curve_prior.remove(&task).unwrap();
    let lib = dir.path().join("library.json");
    std::fs::write(&lib, serde_json::to_string(&json!({ task.to_string(): prior })).unwrap()).unwrap();

    let srv = start(&dir.path().join("data"), Some(lib)).await;
    let c = Client::new();
    let id = create(&c, &srv.url, &create_body(&inst, "exploit")).await.session_id;
    let doc = agents(&c, &srv.url, &id).await;
    let filled = doc.agents[human].tasks.iter().find(|t| t.task_id == task).unwrap();
    assert_eq!(filled.curve, prior.x);
    assert_eq!(filled.completed_reps, 0);
    assert!(filled.observations.is_empty());
    srv.task.abort();
}
