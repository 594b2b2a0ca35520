//! HTTP coordination service: operators create a scheduling session, read the
//! round's schedule, report observed human durations and receive the next
//! round. Every session is an event log on disk and survives restarts.

pub mod api;
pub mod config;
pub mod error;
pub mod session;
pub mod store;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use lcsched_core::learning::KalmanState;
use lcsched_core::{AgentKind, ProblemInstance, TaskId};

pub use api::app;
pub use config::ServiceConfig;
pub use error::ServiceError;
pub use session::Session;

use session::{plan_round, Event};
use store::EventLog;

pub type PriorLibrary = BTreeMap<TaskId, KalmanState>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    sessions_dir: PathBuf,
    config: ServiceConfig,
    library: PriorLibrary,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
}

pub(crate) struct SessionHandle {
    /// Held for the whole of a write so rounds of one session never race.
    pub log: Arc<tokio::sync::Mutex<EventLog>>,
    pub state: RwLock<Arc<Session>>,
}

impl SessionHandle {
    pub fn snapshot(&self) -> Arc<Session> {
        self.state.read().expect("session lock poisoned").clone()
    }

    pub fn replace(&self, s: Session) {
        *self.state.write().expect("session lock poisoned") = Arc::new(s);
    }
}

impl AppState {
    /// Loads the prior library and replays every session log under the data
    /// directory.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let library = match &config.prior_library {
            Some(p) => load_library(p)?,
            None => PriorLibrary::new(),
        };
        let sessions_dir = config.data_dir.join("sessions");
        let mut sessions = HashMap::new();
        for path in EventLog::list(&sessions_dir)? {
            let events = EventLog::read(&path)?;
            let mut session = Session::replay(&events).map_err(|e| ServiceError::CorruptLog {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let mut log = EventLog::open(path)?;
            if session.needs_plan() {
                let plan = plan_round(
                    &session.instance,
                    &session.strategy,
                    &session.search,
                    session.round_index,
                    session.previous_schedule(),
                )?;
                let e = Event::Scheduled { plan };
                session.apply(&e)?;
                log.append(&[e])?;
            }
            tracing::info!(session_id = %session.session_id, round = session.round_index, "session restored");
            sessions.insert(
                session.session_id.clone(),
                Arc::new(SessionHandle {
                    log: Arc::new(tokio::sync::Mutex::new(log)),
                    state: RwLock::new(Arc::new(session)),
                }),
            );
        }
        Ok(Self {
            inner: Arc::new(Inner {
                sessions_dir,
                config,
                library,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    /// Current state of a session, if it exists.
    pub fn session(&self, id: &str) -> Option<Session> {
        self.handle(id).map(|h| (*h.snapshot()).clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inner.sessions.read().expect("sessions lock poisoned").keys().cloned().collect();
        ids.sort();
        ids
    }

    pub(crate) fn handle(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.inner.sessions.read().expect("sessions lock poisoned").get(id).cloned()
    }

    pub(crate) fn insert(&self, id: String, handle: SessionHandle) {
        self.inner
            .sessions
            .write()
            .expect("sessions lock poisoned")
            .insert(id, Arc::new(handle));
    }

    pub(crate) fn sessions_dir(&self) -> &Path {
        &self.inner.sessions_dir
    }

    /// Gives human agents the library curve for every task they lack one for.
    pub fn fill_from_library(&self, instance: &mut ProblemInstance) {
        for agent in instance.agents.iter_mut().filter(|a| a.kind == AgentKind::Human) {
            for (task, state) in &self.inner.library {
                if instance.tasks.iter().any(|t| &t.task_id == task) {
                    agent.curve_prior.entry(task.clone()).or_insert_with(|| state.clone());
                }
            }
        }
    }
}

fn load_library(path: &Path) -> Result<PriorLibrary, ServiceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServiceError::Config(format!("cannot read prior library {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| ServiceError::Config(format!("prior library {}: {e}", path.display())))
}

/// Serves the API on `listener` until the task is dropped or aborted.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, app(state)).await
}
