//! Command side of the service: validates each command against the current
//! state, turns it into log records, and commits them atomically.

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{HillError, Result};
use crate::events::{Event, EventRecord, ScreenOutcome};
use crate::gate::{auto_screen, Decision, GatePolicy, ReviewItem};
use crate::ingest::{
    parse_response, sniff_response_id, split_batch, Cycle, CycleStatus, IngestReport, Prototype,
    RecordError, ResponseStatus, SurveyResponse,
};
use crate::instrument::{Dimension, Instrument};
use crate::model::{ModelMetrics, ModelState, Prediction, TrainingRow};
use crate::planner::{
    check_capacity, check_estimate, prioritize, select_first_fit, summaries_from_rollup,
    PlanDocument, PlanningStatistic, PriorityBoard, SprintScope, UserStory,
};
use crate::scoring::{composite_scores, feedback_from_scores, rollup, CycleRollup, DimensionFeedback};
use crate::state::State;

pub trait Clock: Send {
    fn now(&mut self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&mut self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock advancing by a fixed step per reading.
#[derive(Debug, Clone)]
pub struct StepClock {
    next: DateTime<Utc>,
    step: Duration,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        StepClock { next: start, step }
    }
}

impl Clock for StepClock {
    fn now(&mut self) -> DateTime<Utc> {
        let t = self.next;
        self.next += self.step;
        t
    }
}

/// Durable destination of committed records. A failed append aborts the
/// commit.
pub trait LogSink: Send {
    fn append(&mut self, records: &[EventRecord]) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub policy: GatePolicy,
    pub statistic: PlanningStatistic,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            policy: GatePolicy::default(),
            statistic: PlanningStatistic::Mean,
        }
    }
}

/// Scratch copy of the state that records are applied to before commit.
pub struct Tx<'a> {
    pub state: State,
    events: Vec<EventRecord>,
    clock: &'a mut dyn Clock,
}

impl Tx<'_> {
    pub fn emit(&mut self, event: Event) -> Result<()> {
        let rec = EventRecord {
            seq: self.state.last_seq + 1,
            at: self.clock.now(),
            event,
        };
        self.state.apply(&rec)?;
        self.events.push(rec);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentEntry {
    pub response_id: String,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model_version: u64,
    pub rows_trained: usize,
    pub metrics: Option<ModelMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub feedback: Vec<DimensionFeedback>,
    pub rollup: CycleRollup,
    pub board: PriorityBoard,
    pub scope: SprintScope,
    pub metrics: ModelMetrics,
}

pub struct Engine {
    state: State,
    log: Vec<EventRecord>,
    clock: Box<dyn Clock>,
    sink: Option<Box<dyn LogSink>>,
    pub config: EngineConfig,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("last_seq", &self.state.last_seq)
            .field("config", &self.config)
            .field("durable", &self.sink.is_some())
            .finish()
    }
}

impl Engine {
    /// Fresh engine whose first record fixes the instrument and model prior.
    pub fn create(
        instrument: Instrument,
        model: ModelState,
        clock: Box<dyn Clock>,
        sink: Option<Box<dyn LogSink>>,
    ) -> Result<Engine> {
        let mut engine = Engine {
            state: State::default(),
            log: Vec::new(),
            clock,
            sink,
            config: EngineConfig::default(),
        };
        engine.transact(|tx| tx.emit(Event::Initialized { instrument, model }))?;
        Ok(engine)
    }

    /// Engine over already materialized state and its log (snapshot restore
    /// or replay).
    pub fn from_parts(
        state: State,
        log: Vec<EventRecord>,
        clock: Box<dyn Clock>,
        sink: Option<Box<dyn LogSink>>,
    ) -> Engine {
        Engine {
            state,
            log,
            clock,
            sink,
            config: EngineConfig::default(),
        }
    }

    pub fn replay(log: Vec<EventRecord>, clock: Box<dyn Clock>, sink: Option<Box<dyn LogSink>>) -> Result<Engine> {
        let state = State::replay(&log)?;
        Ok(Engine::from_parts(state, log, clock, sink))
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn instrument(&self) -> &Instrument {
        &self.state.instrument
    }

    pub fn set_sink(&mut self, sink: Option<Box<dyn LogSink>>) {
        self.sink = sink;
    }

    /// Runs `f` against a scratch copy; on success writes the produced
    /// records to the sink and swaps the state in. Nothing is kept on error.
    pub fn transact<T>(&mut self, f: impl FnOnce(&mut Tx<'_>) -> Result<T>) -> Result<T> {
        let mut tx = Tx {
            state: self.state.clone(),
            events: Vec::new(),
            clock: self.clock.as_mut(),
        };
        let out = f(&mut tx)?;
        let Tx { state, events, .. } = tx;
        if !events.is_empty() {
            if let Some(sink) = self.sink.as_mut() {
                sink.append(&events)?;
            }
            self.state = state;
            self.log.extend(events);
        }
        Ok(out)
    }

    // ---- cycles and prototypes ----

    pub fn create_cycle(&mut self, cycle_id: &str, start: NaiveDate, timebox_days: i64) -> Result<Cycle> {
        let cycle = Cycle::new(cycle_id, start, timebox_days)?;
        if self.state.cycles.contains_key(cycle_id) {
            return Err(HillError::DuplicateCycle(cycle_id.to_string()));
        }
        self.transact(|tx| tx.emit(Event::CycleCreated { cycle: cycle.clone() }))?;
        Ok(cycle)
    }

    /// planned → running → testing. Closing happens in the pipeline.
    pub fn advance_cycle(&mut self, cycle_id: &str) -> Result<CycleStatus> {
        let current = self.state.cycle(cycle_id)?.status;
        let to = current.next_manual().ok_or_else(|| HillError::CycleStatus {
            cycle: cycle_id.to_string(),
            actual: current.to_string(),
            expected: "planned or running".into(),
        })?;
        self.transact(|tx| {
            tx.emit(Event::CycleAdvanced {
                cycle_id: cycle_id.to_string(),
                to,
            })
        })?;
        Ok(to)
    }

    pub fn register_prototype(&mut self, prototype: Prototype) -> Result<()> {
        self.state.cycle(&prototype.cycle_id)?;
        if prototype.prototype_id.trim().is_empty() {
            return Err(HillError::Malformed("empty prototype id".into()));
        }
        if let Some(existing) = self.state.prototypes.get(&prototype.prototype_id) {
            return Err(HillError::PrototypeCycleMismatch {
                prototype: prototype.prototype_id.clone(),
                owner: existing.cycle_id.clone(),
                cycle: prototype.cycle_id.clone(),
            });
        }
        self.transact(|tx| tx.emit(Event::PrototypeRegistered { prototype }))
    }

    // ---- ingest ----

    /// Ingests a batch given as JSON array or JSON Lines text.
    pub fn ingest_text(&mut self, cycle_id: &str, text: &str) -> Result<IngestReport> {
        let records = split_batch(text)?;
        self.ingest_responses(cycle_id, &records)
    }

    /// Stores every valid record as pending. Invalid records are reported
    /// by index; records whose `response_id` is already stored are skipped.
    pub fn ingest_responses(&mut self, cycle_id: &str, records: &[String]) -> Result<IngestReport> {
        require_status(self.state.cycle(cycle_id)?, &[CycleStatus::Testing])?;
        self.transact(|tx| {
            let mut report = IngestReport {
                stored: 0,
                errors: Vec::new(),
            };
            for (index, text) in records.iter().enumerate() {
                match validate_record(&tx.state, cycle_id, text) {
                    Ok(Some(response)) => {
                        tx.emit(Event::ResponseIngested { response })?;
                        report.stored += 1;
                    }
                    Ok(None) => {}
                    Err(e) => report
                        .errors
                        .push(RecordError::new(index, sniff_response_id(text), e)),
                }
            }
            Ok(report)
        })
    }

    /// Comments of accepted responses, ordered by submission time then id.
    pub fn collect_comments(&self, cycle_id: &str) -> Result<Vec<CommentEntry>> {
        self.state.cycle(cycle_id)?;
        let mut accepted: Vec<&SurveyResponse> = self.state.accepted_responses(Some(cycle_id)).collect();
        accepted.sort_by(|a, b| {
            a.submitted_at
                .cmp(&b.submitted_at)
                .then_with(|| a.response_id.cmp(&b.response_id))
        });
        Ok(accepted
            .into_iter()
            .flat_map(|r| {
                r.comments.iter().map(|c| CommentEntry {
                    response_id: r.response_id.clone(),
                    comment: c.clone(),
                })
            })
            .collect())
    }

    // ---- gate ----

    /// Screens every not-yet-screened pending response of the cycle once.
    /// Returns how many were queued for review.
    pub fn enqueue_flagged(&mut self, cycle_id: &str, policy: &GatePolicy) -> Result<usize> {
        policy.validate()?;
        require_status(
            self.state.cycle(cycle_id)?,
            &[CycleStatus::Testing, CycleStatus::Closed],
        )?;
        self.transact(|tx| {
            let instrument = tx.state.instrument.clone();
            let batch: Vec<[f64; 4]> = tx
                .state
                .responses_in_cycle(cycle_id)
                .filter(|r| r.status != ResponseStatus::Rejected)
                .map(|r| composite_scores(r, &instrument).features())
                .collect();
            let mut todo: Vec<&SurveyResponse> = tx
                .state
                .responses_in_cycle(cycle_id)
                .filter(|r| r.status == ResponseStatus::Pending && !tx.state.screened.contains(&r.response_id))
                .collect();
            todo.sort_by(|a, b| {
                a.submitted_at
                    .cmp(&b.submitted_at)
                    .then_with(|| a.response_id.cmp(&b.response_id))
            });
            let mut events = Vec::with_capacity(todo.len());
            for r in todo {
                let screening = auto_screen(r, &instrument, &batch, policy)?;
                let outcome = if !screening.is_clean() {
                    ScreenOutcome::Flagged
                } else if policy.auto_accept_clean {
                    ScreenOutcome::AutoAccepted
                } else {
                    ScreenOutcome::QueuedClean
                };
                events.push(Event::Screened {
                    response_id: r.response_id.clone(),
                    flags: screening.flags,
                    notes: screening.notes,
                    policy: policy.clone(),
                    outcome,
                });
            }
            let mut queued = 0;
            for e in events {
                if let Event::Screened { outcome, .. } = &e {
                    if *outcome != ScreenOutcome::AutoAccepted {
                        queued += 1;
                    }
                }
                tx.emit(e)?;
            }
            Ok(queued)
        })
    }

    pub fn review_queue(&self) -> Vec<ReviewItem> {
        self.state.open_review_items().cloned().collect()
    }

    pub fn review_decision(&mut self, response_id: &str, decision: Decision, engineer_id: &str) -> Result<ReviewItem> {
        self.state.response(response_id)?;
        let item = self
            .state
            .review
            .get(response_id)
            .ok_or_else(|| HillError::NotUnderReview(response_id.to_string()))?;
        if item.decision.is_some() {
            return Err(HillError::AlreadyDecided(response_id.to_string()));
        }
        if engineer_id.trim().is_empty() {
            return Err(HillError::Malformed("engineer id is empty".into()));
        }
        self.transact(|tx| {
            tx.emit(Event::Decided {
                response_id: response_id.to_string(),
                decision,
                engineer_id: engineer_id.to_string(),
            })
        })?;
        Ok(self.state.review[response_id].clone())
    }

    pub fn training_rows(&self, cycle_id: Option<&str>) -> Vec<TrainingRow> {
        self.state.training_rows(cycle_id)
    }

    // ---- scoring ----

    pub fn aggregate_feedback(&self, cycle_id: &str, prototype_id: &str) -> Result<DimensionFeedback> {
        aggregate(&self.state, cycle_id, prototype_id)
    }

    /// Feedback for every prototype of the cycle that has accepted data.
    pub fn cycle_feedback(&self, cycle_id: &str) -> Result<Vec<DimensionFeedback>> {
        cycle_feedback(&self.state, cycle_id)
    }

    pub fn cycle_rollup(&self, cycle_id: &str) -> Result<CycleRollup> {
        rollup(cycle_id, &cycle_feedback(&self.state, cycle_id)?)
    }

    /// Computes and records feedback for one prototype or all of them.
    pub fn score(&mut self, cycle_id: &str, prototype_id: Option<&str>) -> Result<Vec<DimensionFeedback>> {
        let feedback = match prototype_id {
            Some(p) => vec![aggregate(&self.state, cycle_id, p)?],
            None => cycle_feedback(&self.state, cycle_id)?,
        };
        self.transact(|tx| {
            for fb in &feedback {
                tx.emit(Event::FeedbackComputed { feedback: fb.clone() })?;
            }
            Ok(())
        })?;
        Ok(feedback)
    }

    // ---- planning ----

    pub fn priority_board(&self, cycle_id: &str) -> Result<PriorityBoard> {
        board_for(&self.state, cycle_id, self.config.statistic)
    }

    pub fn draft_story(
        &mut self,
        cycle_id: &str,
        category: Dimension,
        narrative: &str,
        acceptance_criteria: Vec<String>,
        source_comments: Vec<String>,
    ) -> Result<UserStory> {
        self.state.cycle(cycle_id)?;
        if narrative.trim().is_empty() {
            return Err(HillError::EmptyNarrative);
        }
        for id in &source_comments {
            self.state.response(id)?;
        }
        let story = UserStory {
            story_id: self.state.next_story_id(),
            cycle_id: cycle_id.to_string(),
            category,
            narrative: narrative.to_string(),
            acceptance_criteria,
            source_comments,
            estimate: None,
            tasks: Vec::new(),
            selected: false,
        };
        self.transact(|tx| tx.emit(Event::StoryDrafted { story: story.clone() }))?;
        Ok(story)
    }

    pub fn estimate_story(&mut self, story_id: u64, points: i64) -> Result<UserStory> {
        let story = self.story(story_id)?;
        let points = check_estimate(points)?;
        if story.selected {
            return Err(HillError::StorySelected(story_id));
        }
        self.transact(|tx| tx.emit(Event::StoryEstimated { story_id, points }))?;
        self.story(story_id)
    }

    pub fn skip_dimension(&mut self, cycle_id: &str, dimension: Dimension, skipped: bool) -> Result<()> {
        self.state.cycle(cycle_id)?;
        self.transact(|tx| {
            tx.emit(Event::DimensionSkipped {
                cycle_id: cycle_id.to_string(),
                dimension,
                skipped,
            })
        })
    }

    /// Prioritizes from current feedback and fills the sprint first-fit.
    /// Never touches cycle dates.
    pub fn select_scope(&mut self, cycle_id: &str, capacity: i64) -> Result<SprintScope> {
        let capacity = check_capacity(capacity)?;
        let statistic = self.config.statistic;
        self.transact(|tx| plan_in(tx, cycle_id, capacity, statistic))
            .map(|plan| plan.scope)
    }

    pub fn task_breakdown(&mut self, story_id: u64, tasks: Vec<String>) -> Result<UserStory> {
        let story = self.story(story_id)?;
        if !story.selected {
            return Err(HillError::StoryNotSelected(story_id));
        }
        if tasks.is_empty() || tasks.iter().any(|t| t.trim().is_empty()) {
            return Err(HillError::EmptyTasks);
        }
        self.transact(|tx| tx.emit(Event::TasksRecorded { story_id, tasks }))?;
        self.story(story_id)
    }

    pub fn story(&self, story_id: u64) -> Result<UserStory> {
        self.state
            .stories
            .get(&story_id)
            .cloned()
            .ok_or(HillError::UnknownStory(story_id))
    }

    /// Latest plan with current story details (tasks recorded after
    /// selection included).
    pub fn plan(&self, cycle_id: &str) -> Result<PlanDocument> {
        plan_view(&self.state, cycle_id)
    }

    // ---- model ----

    /// Trains on the cycle's accepted rows not yet seen by the model.
    /// Refused while any review item of the cycle is undecided.
    pub fn train(&mut self, cycle_id: &str, forgetting: Option<f64>) -> Result<TrainOutcome> {
        self.state.cycle(cycle_id)?;
        ensure_gate_clear(&self.state, cycle_id)?;
        self.transact(|tx| train_in(tx, cycle_id, forgetting))
    }

    pub fn predict(&self, features: &[f64; 4]) -> Result<Prediction> {
        self.state.model.predict(features, self.state.instrument.scale())
    }

    pub fn model(&self) -> &ModelState {
        &self.state.model
    }

    pub fn metrics(&self) -> &[ModelMetrics] {
        &self.state.metrics
    }

    // ---- pipeline ----

    /// screen → aggregate → prioritize → select scope → train → evaluate,
    /// then close the cycle. The gate must be clear after screening; the
    /// stages after it commit together or not at all.
    pub fn run_cycle_pipeline(&mut self, cycle_id: &str, capacity: i64) -> Result<PipelineOutput> {
        require_status(self.state.cycle(cycle_id)?, &[CycleStatus::Testing])?;
        let capacity = check_capacity(capacity)?;
        let policy = self.config.policy.clone();
        let statistic = self.config.statistic;
        self.enqueue_flagged(cycle_id, &policy)?;
        ensure_gate_clear(&self.state, cycle_id)?;

        self.transact(|tx| {
            let feedback = cycle_feedback(&tx.state, cycle_id)?;
            for fb in &feedback {
                tx.emit(Event::FeedbackComputed { feedback: fb.clone() })?;
            }
            let roll = rollup(cycle_id, &feedback)?;
            let plan = plan_in(tx, cycle_id, capacity, statistic)?;
            let trained = train_in(tx, cycle_id, None)?;
            let metrics = trained.metrics.ok_or_else(|| HillError::NoAcceptedData {
                cycle: cycle_id.to_string(),
                prototype: None,
            })?;
            tx.emit(Event::CycleClosed {
                cycle_id: cycle_id.to_string(),
                model_version: tx.state.model.version,
            })?;
            Ok(PipelineOutput {
                feedback,
                rollup: roll,
                board: plan.board,
                scope: plan.scope,
                metrics,
            })
        })
    }
}

fn require_status(cycle: &Cycle, allowed: &[CycleStatus]) -> Result<()> {
    if allowed.contains(&cycle.status) {
        return Ok(());
    }
    Err(HillError::CycleStatus {
        cycle: cycle.cycle_id.clone(),
        actual: cycle.status.to_string(),
        expected: allowed
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join(" or "),
    })
}

fn ensure_gate_clear(state: &State, cycle_id: &str) -> Result<()> {
    let open: Vec<String> = state
        .open_review_items()
        .filter(|i| i.cycle_id == cycle_id)
        .map(|i| i.response_id.clone())
        .collect();
    if open.is_empty() {
        Ok(())
    } else {
        Err(HillError::UndecidedReviewItems(open))
    }
}

/// `Ok(None)` for a response id that is already stored.
fn validate_record(state: &State, cycle_id: &str, text: &str) -> Result<Option<SurveyResponse>> {
    let response = parse_response(text, &state.instrument)?;
    if state.responses.contains_key(&response.response_id) {
        return Ok(None);
    }
    if response.cycle_id != cycle_id {
        return Err(HillError::CycleMismatch {
            record: response.cycle_id,
            batch: cycle_id.to_string(),
        });
    }
    let proto = state
        .prototypes
        .get(&response.prototype_id)
        .ok_or_else(|| HillError::UnknownPrototype(response.prototype_id.clone()))?;
    if proto.cycle_id != cycle_id {
        return Err(HillError::PrototypeCycleMismatch {
            prototype: proto.prototype_id.clone(),
            owner: proto.cycle_id.clone(),
            cycle: cycle_id.to_string(),
        });
    }
    let duplicate = state.responses_in_cycle(cycle_id).any(|r| {
        r.respondent_id == response.respondent_id && r.prototype_id == response.prototype_id
    });
    if duplicate {
        return Err(HillError::DuplicateRespondent {
            respondent: response.respondent_id,
            prototype: response.prototype_id,
            cycle: cycle_id.to_string(),
        });
    }
    Ok(Some(response))
}

/// Feedback over the accepted responses of one prototype.
pub fn aggregate(state: &State, cycle_id: &str, prototype_id: &str) -> Result<DimensionFeedback> {
    state.cycle(cycle_id)?;
    let scores: Vec<_> = state
        .accepted_responses(Some(cycle_id))
        .filter(|r| r.prototype_id == prototype_id)
        .map(|r| composite_scores(r, &state.instrument))
        .collect();
    feedback_from_scores(cycle_id, prototype_id, &scores)
}

/// Feedback for every prototype of the cycle with accepted data, by id.
pub fn cycle_feedback(state: &State, cycle_id: &str) -> Result<Vec<DimensionFeedback>> {
    state.cycle(cycle_id)?;
    let mut prototypes: Vec<&str> = state
        .accepted_responses(Some(cycle_id))
        .map(|r| r.prototype_id.as_str())
        .collect();
    prototypes.sort_unstable();
    prototypes.dedup();
    if prototypes.is_empty() {
        return Err(HillError::NoAcceptedData {
            cycle: cycle_id.to_string(),
            prototype: None,
        });
    }
    prototypes
        .into_iter()
        .map(|p| aggregate(state, cycle_id, p))
        .collect()
}

pub fn board_for(state: &State, cycle_id: &str, statistic: PlanningStatistic) -> Result<PriorityBoard> {
    let roll = rollup(cycle_id, &cycle_feedback(state, cycle_id)?)?;
    prioritize(cycle_id, &summaries_from_rollup(&roll, statistic), statistic)
}

pub fn plan_view(state: &State, cycle_id: &str) -> Result<PlanDocument> {
    state.cycle(cycle_id)?;
    let mut plan = state
        .plans
        .get(cycle_id)
        .cloned()
        .ok_or_else(|| HillError::NoPriorityBoard(cycle_id.to_string()))?;
    plan.stories = plan
        .scope
        .selected_stories
        .iter()
        .filter_map(|id| state.stories.get(id).cloned())
        .collect();
    plan.skipped_dimensions = state.skipped_dimensions(cycle_id);
    Ok(plan)
}

fn plan_in(tx: &mut Tx<'_>, cycle_id: &str, capacity: u32, statistic: PlanningStatistic) -> Result<PlanDocument> {
    let board = board_for(&tx.state, cycle_id, statistic)?;
    let skipped = tx.state.skipped_dimensions(cycle_id);
    let stories = tx.state.stories_in_cycle(cycle_id);
    let scope = select_first_fit(&board, &stories, capacity, &skipped)?;
    let plan = PlanDocument {
        cycle_id: cycle_id.to_string(),
        board,
        stories: scope
            .selected_stories
            .iter()
            .filter_map(|id| stories.iter().find(|s| s.story_id == *id))
            .map(|s| UserStory {
                selected: true,
                ..s.clone()
            })
            .collect(),
        scope,
        skipped_dimensions: skipped,
    };
    tx.emit(Event::PlanCreated { plan: plan.clone() })?;
    Ok(plan)
}

fn train_in(tx: &mut Tx<'_>, cycle_id: &str, forgetting: Option<f64>) -> Result<TrainOutcome> {
    let all_rows = tx.state.training_rows(Some(cycle_id));
    let fresh: Vec<TrainingRow> = all_rows
        .iter()
        .filter(|r| !tx.state.trained.contains(&r.response_id))
        .cloned()
        .collect();
    let current = &tx.state.model;
    let forgetting = forgetting.unwrap_or(current.forgetting);
    if fresh.is_empty() && forgetting == current.forgetting {
        let metrics = if all_rows.is_empty() {
            None
        } else {
            Some(current.evaluate(&all_rows, tx.clock.now())?)
        };
        return Ok(TrainOutcome {
            model_version: current.version,
            rows_trained: 0,
            metrics,
        });
    }
    let next = current.with_forgetting(forgetting)?.train(&fresh)?;
    let metrics = if all_rows.is_empty() {
        None
    } else {
        Some(next.evaluate(&all_rows, tx.clock.now())?)
    };
    tx.emit(Event::ModelUpdated {
        cycle_id: Some(cycle_id.to_string()),
        forgetting,
        rows: fresh.clone(),
        version: next.version,
        metrics: metrics.clone(),
    })?;
    Ok(TrainOutcome {
        model_version: next.version,
        rows_trained: fresh.len(),
        metrics,
    })
}
