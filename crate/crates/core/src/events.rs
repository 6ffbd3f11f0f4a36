//! The append-only event log. Every state change is one record; replaying
//! the records in order rebuilds the full engine state.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::gate::{Decision, Flag, GatePolicy};
use crate::ingest::{Cycle, CycleStatus, Prototype, SurveyResponse};
use crate::instrument::{Dimension, Instrument};
use crate::model::{ModelMetrics, ModelState, TrainingRow};
use crate::planner::PlanDocument;
use crate::planner::UserStory;
use crate::scoring::DimensionFeedback;

/// What the automatic screening did with a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenOutcome {
    AutoAccepted,
    Flagged,
    QueuedClean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Initialized {
        instrument: Instrument,
        model: ModelState,
    },
    CycleCreated {
        cycle: Cycle,
    },
    CycleAdvanced {
        cycle_id: String,
        to: CycleStatus,
    },
    PrototypeRegistered {
        prototype: Prototype,
    },
    ResponseIngested {
        response: SurveyResponse,
    },
    Screened {
        response_id: String,
        flags: Vec<Flag>,
        notes: Vec<String>,
        policy: GatePolicy,
        outcome: ScreenOutcome,
    },
    Decided {
        response_id: String,
        decision: Decision,
        engineer_id: String,
    },
    FeedbackComputed {
        feedback: DimensionFeedback,
    },
    ModelUpdated {
        cycle_id: Option<String>,
        forgetting: f64,
        rows: Vec<TrainingRow>,
        version: u64,
        metrics: Option<ModelMetrics>,
    },
    PlanCreated {
        plan: PlanDocument,
    },
    StoryDrafted {
        story: UserStory,
    },
    StoryEstimated {
        story_id: u64,
        points: u32,
    },
    TasksRecorded {
        story_id: u64,
        tasks: Vec<String>,
    },
    DimensionSkipped {
        cycle_id: String,
        dimension: Dimension,
        skipped: bool,
    },
    CycleClosed {
        cycle_id: String,
        model_version: u64,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Initialized { .. } => "initialized",
            Event::CycleCreated { .. } => "cycle_created",
            Event::CycleAdvanced { .. } => "cycle_advanced",
            Event::PrototypeRegistered { .. } => "prototype_registered",
            Event::ResponseIngested { .. } => "response_ingested",
            Event::Screened { .. } => "screened",
            Event::Decided { .. } => "decided",
            Event::FeedbackComputed { .. } => "feedback_computed",
            Event::ModelUpdated { .. } => "model_updated",
            Event::PlanCreated { .. } => "plan_created",
            Event::StoryDrafted { .. } => "story_drafted",
            Event::StoryEstimated { .. } => "story_estimated",
            Event::TasksRecorded { .. } => "tasks_recorded",
            Event::DimensionSkipped { .. } => "dimension_skipped",
            Event::CycleClosed { .. } => "cycle_closed",
        }
    }
}

/// One log line: `{"seq":…,"at":…,"kind":…,"payload":{…}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: Event,
}
