use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::info;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use crate::dynamics::ChainModel;
use crate::env::{EnvConfig, EnvError, EnvHandle, SpineEnv, StepResult};

/// Overrides the port of the bind address when set.
pub const PORT_ENV: &str = "SPINECTL_PORT";

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub max_sessions: usize,
    pub idle_timeout: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            max_sessions: 64,
            idle_timeout: Duration::from_secs(300),
        }
    }
}

impl ServiceConfig {
    /// Apply the port override from the environment, if any.
    pub fn with_port_override(mut self) -> Result<Self, String> {
        if let Ok(p) = std::env::var(PORT_ENV) {
            let port = p.parse().map_err(|_| format!("{PORT_ENV}={p} is not a port"))?;
            self.bind.set_port(port);
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpecResponse {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub dt: f64,
    pub max_steps: usize,
}

/// Body of every non-2xx response. `error` is a stable code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

struct ApiError(StatusCode, &'static str, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.1.to_string(),
            message: self.2,
        };
        (self.0, Json(body)).into_response()
    }
}

impl From<EnvError> for ApiError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::ActionLength { .. } => ApiError(StatusCode::BAD_REQUEST, "action length", e.to_string()),
            EnvError::AwaitingReset => ApiError(StatusCode::CONFLICT, "episode terminal", e.to_string()),
            other => ApiError(StatusCode::INTERNAL_SERVER_ERROR, "simulation", other.to_string()),
        }
    }
}

fn malformed(r: JsonRejection) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, "malformed request", r.body_text())
}

fn unknown(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "unknown session", format!("no session {id}"))
}

struct Session {
    env: SpineEnv,
    last_activity: Instant,
}

struct AppState {
    model: Arc<ChainModel>,
    env_config: EnvConfig,
    config: ServiceConfig,
    sessions: std::sync::Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    counter: AtomicU64,
}

type Shared = Arc<AppState>;

impl AppState {
    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| unknown(id))
    }

    fn spec(&self) -> SpecResponse {
        let probe = SpineEnv::new(self.model.clone(), self.env_config.clone()).expect("validated at startup");
        SpecResponse {
            obs_dim: probe.obs_dim(),
            act_dim: probe.act_dim(),
            dt: self.env_config.dt,
            max_steps: self.env_config.max_episode_steps,
        }
    }

    fn reap(&self) {
        let timeout = self.config.idle_timeout;
        self.sessions.lock().expect("session table poisoned").retain(|id, s| {
            // sessions busy in a request are never idle
            let keep = s.try_lock().map_or(true, |s| s.last_activity.elapsed() < timeout);
            if !keep {
                info!("reaping idle session {id}");
            }
            keep
        });
    }
}

#[derive(Debug, Default, Deserialize)]
struct SeedBody {
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct ActionBody {
    action: Vec<f64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Created {
    session_id: String,
    observation: Vec<f64>,
}

#[derive(Serialize)]
struct Observation {
    observation: Vec<f64>,
}

async fn get_spec(State(st): State<Shared>) -> Json<SpecResponse> {
    Json(st.spec())
}

async fn create_session(State(st): State<Shared>, body: Option<Json<SeedBody>>) -> Result<Json<Created>, ApiError> {
    let seed = body.and_then(|b| b.0.seed).unwrap_or_else(rand::random);
    let mut env = SpineEnv::new(st.model.clone(), st.env_config.clone())?;
    let observation = env.reset(Some(seed))?;
    let n = st.counter.fetch_add(1, Ordering::Relaxed);
    let id = format!("{:08x}{:016x}", n, rand::random::<u64>());
    {
        let mut table = st.sessions.lock().expect("session table poisoned");
        if table.len() >= st.config.max_sessions {
            return Err(ApiError(
                StatusCode::SERVICE_UNAVAILABLE,
                "too many sessions",
                format!("limit is {}", st.config.max_sessions),
            ));
        }
        table.insert(
            id.clone(),
            Arc::new(Mutex::new(Session {
                env,
                last_activity: Instant::now(),
            })),
        );
    }
    Ok(Json(Created {
        session_id: id,
        observation,
    }))
}

async fn reset_session(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Result<Option<Json<SeedBody>>, JsonRejection>,
) -> Result<Json<Observation>, ApiError> {
    let seed = body.map_err(malformed)?.and_then(|b| b.0.seed);
    let session = st.session(&id)?;
    let mut s = session.lock().await;
    s.last_activity = Instant::now();
    let observation = s.env.reset(seed)?;
    Ok(Json(Observation { observation }))
}

async fn step_session(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ActionBody>, JsonRejection>,
) -> Result<Json<StepResult>, ApiError> {
    let session = st.session(&id)?;
    let Json(body) = body.map_err(malformed)?;
    let mut s = session.lock().await;
    s.last_activity = Instant::now();
    Ok(Json(s.env.step(&body.action)?))
}

async fn delete_session(State(st): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match st.sessions.lock().expect("session table poisoned").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(unknown(&id)),
    }
}

async fn fallback() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "not found", "no such route".into())
}

fn build(model: Arc<ChainModel>, env_config: EnvConfig, config: ServiceConfig) -> Result<(Router, Shared), EnvError> {
    SpineEnv::new(model.clone(), env_config.clone())?;
    let state = Arc::new(AppState {
        model,
        env_config,
        config,
        sessions: std::sync::Mutex::new(HashMap::new()),
        counter: AtomicU64::new(0),
    });
    let app = Router::new()
        .route("/v1/spec", get(get_spec))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", axum::routing::delete(delete_session))
        .route("/v1/sessions/{id}/reset", post(reset_session))
        .route("/v1/sessions/{id}/step", post(step_session))
        .fallback(fallback)
        .with_state(state.clone());
    Ok((app, state))
}

/// Router without a reaper, for embedding.
pub fn router(model: Arc<ChainModel>, env_config: EnvConfig, config: ServiceConfig) -> Result<Router, EnvError> {
    Ok(build(model, env_config, config)?.0)
}

/// Serve on `listener` until `shutdown` resolves, reaping idle sessions.
pub async fn serve(
    listener: TcpListener,
    model: Arc<ChainModel>,
    env_config: EnvConfig,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let period = (config.idle_timeout / 4).clamp(Duration::from_millis(10), Duration::from_secs(30));
    let (app, state) = build(model, env_config, config).map_err(std::io::Error::other)?;
    let reaper = tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            state.reap();
        }
    });
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    reaper.abort();
    result
}

/// A server running on its own thread and runtime.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServiceHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_inner()
    }

    fn stop_inner(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        let _ = self.stop_inner();
    }
}

/// Bind `config.bind` (port 0 picks a free port) and serve in the background.
pub fn spawn_background(model: Arc<ChainModel>, env_config: EnvConfig, config: ServiceConfig) -> std::io::Result<ServiceHandle> {
    SpineEnv::new(model.clone(), env_config.clone()).map_err(std::io::Error::other)?;
    let std_listener = std::net::TcpListener::bind(config.bind)?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        rt.block_on(async move {
            let listener = TcpListener::from_std(std_listener)?;
            serve(listener, model, env_config, config, async {
                let _ = rx.await;
            })
            .await
        })
    });
    Ok(ServiceHandle {
        addr,
        stop: Some(tx),
        thread: Some(thread),
    })
}
