//! HTTP front end. A single writer thread owns the engine and its log;
//! handlers send it commands and await the reply. Reads never go through
//! the writer: after every commit it publishes an immutable view that
//! handlers load without locking.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use arc_swap::ArcSwap;
use axum::extract::{Path, Query, State as Extract};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hill_core::engine::{board_for, cycle_feedback, plan_view, Engine};
use hill_core::error::HillError;
use hill_core::gate::{Decision, FlagKind, ReviewItem};
use hill_core::planner::PlanningStatistic;
use hill_core::scoring::rollup;
use hill_core::state::State;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot};
use tower_http::services::ServeDir;

pub const ENGINEER_HEADER: &str = "x-engineer-id";

/// What readers see: the state as of the last commit.
#[derive(Debug)]
pub struct View {
    pub state: State,
    pub statistic: PlanningStatistic,
}

impl View {
    fn of(engine: &Engine) -> View {
        View {
            state: engine.state().clone(),
            statistic: engine.config.statistic,
        }
    }
}

/// Runs against the engine and returns the reply, which the writer sends
/// only after publishing the new view so callers read their own writes.
type Job = Box<dyn FnOnce(&mut Engine) -> Reply + Send>;
type Reply = Box<dyn FnOnce() + Send>;

#[derive(Clone)]
pub struct AppState {
    jobs: mpsc::Sender<Job>,
    view: Arc<ArcSwap<View>>,
}

impl AppState {
    /// Moves `engine` onto its own writer thread.
    pub fn spawn(mut engine: Engine) -> AppState {
        let view = Arc::new(ArcSwap::from_pointee(View::of(&engine)));
        let (jobs, mut rx) = mpsc::channel::<Job>(64);
        let published = Arc::clone(&view);
        std::thread::Builder::new()
            .name("hill-writer".into())
            .spawn(move || {
                while let Some(job) = rx.blocking_recv() {
                    let seq = engine.state().last_seq;
                    let reply = job(&mut engine);
                    if engine.state().last_seq != seq {
                        published.store(Arc::new(View::of(&engine)));
                    }
                    reply();
                }
            })
            .expect("spawn writer thread");
        AppState { jobs, view }
    }

    pub fn view(&self) -> Arc<View> {
        self.view.load_full()
    }

    async fn exec<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Engine) -> hill_core::error::Result<T> + Send + 'static,
    {
        let (reply, answer) = oneshot::channel();
        let job: Job = Box::new(move |engine| {
            let out = f(engine);
            Box::new(move || {
                let _ = reply.send(out);
            })
        });
        self.jobs
            .send(job)
            .await
            .map_err(|_| ApiError::Unavailable)?;
        answer.await.map_err(|_| ApiError::Unavailable)?.map_err(ApiError::Hill)
    }
}

#[derive(Debug)]
pub enum ApiError {
    Hill(HillError),
    BadRequest(String),
    Unavailable,
}

impl From<HillError> for ApiError {
    fn from(e: HillError) -> Self {
        ApiError::Hill(e)
    }
}

fn classify(e: &HillError) -> (StatusCode, &'static str) {
    use HillError::*;
    match e {
        UnknownCycle(_) => (StatusCode::NOT_FOUND, "unknown_cycle"),
        UnknownPrototype(_) => (StatusCode::NOT_FOUND, "unknown_prototype"),
        UnknownResponse(_) => (StatusCode::NOT_FOUND, "unknown_response"),
        UnknownStory(_) => (StatusCode::NOT_FOUND, "unknown_story"),
        NotUnderReview(_) => (StatusCode::NOT_FOUND, "not_under_review"),
        NoPriorityBoard(_) => (StatusCode::NOT_FOUND, "no_plan"),
        NoAcceptedData { .. } => (StatusCode::NOT_FOUND, "no_accepted_data"),
        AlreadyDecided(_) => (StatusCode::CONFLICT, "already_decided"),
        UndecidedReviewItems(_) => (StatusCode::CONFLICT, "undecided_review_items"),
        CycleStatus { .. } => (StatusCode::CONFLICT, "cycle_status"),
        DuplicateCycle(_) => (StatusCode::CONFLICT, "duplicate_cycle"),
        StorySelected(_) => (StatusCode::CONFLICT, "story_selected"),
        StoryNotSelected(_) => (StatusCode::CONFLICT, "story_not_selected"),
        UnestimatedStories(_) => (StatusCode::CONFLICT, "unestimated_stories"),
        Io(_) | Replay { .. } | CorruptLog { .. } | CorruptSnapshot { .. } | NonConvergence { .. } => {
            (StatusCode::INTERNAL_SERVER_ERROR, "internal")
        }
        _ => (StatusCode::BAD_REQUEST, "invalid_request"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Hill(e) => {
                let (status, code) = classify(&e);
                let mut body = json!({ "error": code, "message": e.to_string() });
                if let HillError::UndecidedReviewItems(ids) = &e {
                    body["response_ids"] = json!(ids);
                }
                (status, body)
            }
            ApiError::BadRequest(m) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": "invalid_request", "message": m }),
            ),
            ApiError::Unavailable => (
                StatusCode::SERVICE_UNAVAILABLE,
                json!({ "error": "unavailable", "message": "writer stopped" }),
            ),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn to_json<T: serde::Serialize>(v: &T) -> ApiResult {
    serde_json::to_value(v)
        .map(Json)
        .map_err(|e| ApiError::BadRequest(e.to_string()))
}

#[derive(Deserialize)]
struct CycleQuery {
    cycle: String,
}

async fn post_responses(Extract(app): Extract<AppState>, Query(q): Query<CycleQuery>, body: String) -> ApiResult {
    let report = app.exec(move |e| e.ingest_text(&q.cycle, &body)).await?;
    to_json(&report)
}

async fn get_cycles(Extract(app): Extract<AppState>) -> ApiResult {
    let view = app.view();
    to_json(&view.state.cycles.values().collect::<Vec<_>>())
}

async fn get_feedback(Extract(app): Extract<AppState>, Path(id): Path<String>) -> ApiResult {
    let view = app.view();
    let feedback = cycle_feedback(&view.state, &id)?;
    let roll = rollup(&id, &feedback)?;
    let board = board_for(&view.state, &id, view.statistic)?;
    to_json(&json!({
        "cycle_id": id,
        "prototypes": feedback,
        "rollup": roll,
        "board": board,
    }))
}

#[derive(Deserialize)]
struct QueueQuery {
    flag: Option<FlagKind>,
}

async fn get_review_queue(Extract(app): Extract<AppState>, Query(q): Query<QueueQuery>) -> ApiResult {
    let view = app.view();
    let items: Vec<&ReviewItem> = view
        .state
        .open_review_items()
        .filter(|i| q.flag.is_none_or(|k| i.flags.iter().any(|f| f.kind == k)))
        .collect();
    to_json(&items)
}

#[derive(Deserialize)]
struct DecisionBody {
    decision: Decision,
}

async fn post_decision(
    Extract(app): Extract<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(body): Json<DecisionBody>,
) -> ApiResult {
    let engineer = headers
        .get(ENGINEER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ApiError::BadRequest("missing X-Engineer-Id header".into()))?
        .to_string();
    let item = app
        .exec(move |e| e.review_decision(&id, body.decision, &engineer))
        .await?;
    to_json(&item)
}

async fn get_plan(Extract(app): Extract<AppState>, Path(id): Path<String>) -> ApiResult {
    let view = app.view();
    to_json(&plan_view(&view.state, &id)?)
}

#[derive(Deserialize)]
struct PredictBody {
    features: [f64; 4],
}

async fn post_predict(Extract(app): Extract<AppState>, Json(body): Json<PredictBody>) -> ApiResult {
    let view = app.view();
    let prediction = view
        .state
        .model
        .predict(&body.features, view.state.instrument.scale())?;
    to_json(&prediction)
}

async fn get_metrics(Extract(app): Extract<AppState>) -> ApiResult {
    let view = app.view();
    let m = &view.state.model;
    to_json(&json!({
        "model_version": m.version,
        "weights": m.weights,
        "forgetting": m.forgetting,
        "ridge": m.ridge,
        "updates_seen": m.updates_seen,
        "history": view.state.metrics,
    }))
}

#[derive(Deserialize)]
struct UpdateBody {
    cycle_id: String,
    forgetting: Option<f64>,
}

async fn post_model_update(Extract(app): Extract<AppState>, Json(body): Json<UpdateBody>) -> ApiResult {
    let out = app
        .exec(move |e| e.train(&body.cycle_id, body.forgetting))
        .await?;
    to_json(&out)
}

#[derive(Deserialize)]
struct RunBody {
    capacity: i64,
}

async fn post_run(Extract(app): Extract<AppState>, Path(id): Path<String>, Json(body): Json<RunBody>) -> ApiResult {
    let out = app
        .exec(move |e| e.run_cycle_pipeline(&id, body.capacity))
        .await?;
    to_json(&out)
}

pub fn router(app: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/responses", post(post_responses))
        .route("/cycles", get(get_cycles))
        .route("/cycles/{id}/feedback", get(get_feedback))
        .route("/cycles/{id}/plan", get(get_plan))
        .route("/cycles/{id}/run", post(post_run))
        .route("/review-queue", get(get_review_queue))
        .route("/review-queue/{id}/decision", post(post_decision))
        .route("/model/predict", post(post_predict))
        .route("/model/metrics", get(get_metrics))
        .route("/model/update", post(post_model_update))
        .with_state(app);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(engine: Engine, addr: SocketAddr, ui_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let app = router(AppState::spawn(engine), ui_dir);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
