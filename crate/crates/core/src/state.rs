//! Materialized engine state and the fold that applies log records to it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{HillError, Result};
use crate::events::{Event, EventRecord, ScreenOutcome};
use crate::gate::{Decision, ReviewItem};
use crate::ingest::{Cycle, CycleStatus, Prototype, ResponseStatus, SurveyResponse};
use crate::instrument::{Dimension, Instrument};
use crate::model::{init_model, ModelMetrics, ModelState, TrainingRow, DEFAULT_FORGETTING, DEFAULT_RIDGE};
use crate::planner::{PlanDocument, UserStory};
use crate::scoring::{composite_scores, DimensionFeedback};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleModelSnapshot {
    pub cycle_id: String,
    pub model: ModelState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub last_seq: u64,
    pub instrument: Instrument,
    pub cycles: BTreeMap<String, Cycle>,
    pub prototypes: BTreeMap<String, Prototype>,
    pub responses: BTreeMap<String, SurveyResponse>,
    pub screened: BTreeSet<String>,
    pub review: BTreeMap<String, ReviewItem>,
    /// Response ids in the order they were accepted.
    pub accepted: Vec<String>,
    /// Latest feedback per `cycle_id/prototype_id`.
    pub feedback: BTreeMap<String, DimensionFeedback>,
    pub model: ModelState,
    pub trained: BTreeSet<String>,
    pub metrics: Vec<ModelMetrics>,
    pub model_history: Vec<CycleModelSnapshot>,
    pub stories: BTreeMap<u64, UserStory>,
    pub plans: BTreeMap<String, PlanDocument>,
    pub skipped: BTreeMap<String, BTreeSet<Dimension>>,
}

impl Default for State {
    fn default() -> Self {
        State {
            last_seq: 0,
            instrument: Instrument::default(),
            cycles: BTreeMap::new(),
            prototypes: BTreeMap::new(),
            responses: BTreeMap::new(),
            screened: BTreeSet::new(),
            review: BTreeMap::new(),
            accepted: Vec::new(),
            feedback: BTreeMap::new(),
            model: init_model(DEFAULT_RIDGE, DEFAULT_FORGETTING).expect("default hyperparameters"),
            trained: BTreeSet::new(),
            metrics: Vec::new(),
            model_history: Vec::new(),
            stories: BTreeMap::new(),
            plans: BTreeMap::new(),
            skipped: BTreeMap::new(),
        }
    }
}

pub fn feedback_key(cycle_id: &str, prototype_id: &str) -> String {
    format!("{cycle_id}/{prototype_id}")
}

fn replay_err(seq: u64, reason: impl Into<String>) -> HillError {
    HillError::Replay {
        seq,
        reason: reason.into(),
    }
}

impl State {
    /// Rebuilds state from a complete log.
    pub fn replay<'a>(records: impl IntoIterator<Item = &'a EventRecord>) -> Result<State> {
        let mut state = State::default();
        for r in records {
            state.apply(r)?;
        }
        Ok(state)
    }

    pub fn apply(&mut self, rec: &EventRecord) -> Result<()> {
        let seq = rec.seq;
        if seq != self.last_seq + 1 {
            return Err(replay_err(seq, format!("expected seq {}", self.last_seq + 1)));
        }
        match &rec.event {
            Event::Initialized { instrument, model } => {
                if seq != 1 {
                    return Err(replay_err(seq, "initialization must be the first record"));
                }
                self.instrument = instrument.clone();
                self.model = model.clone();
            }
            Event::CycleCreated { cycle } => {
                if self.cycles.contains_key(&cycle.cycle_id) {
                    return Err(replay_err(seq, format!("cycle {} exists", cycle.cycle_id)));
                }
                self.cycles.insert(cycle.cycle_id.clone(), cycle.clone());
            }
            Event::CycleAdvanced { cycle_id, to } => {
                self.cycle_mut(seq, cycle_id)?.status = *to;
            }
            Event::PrototypeRegistered { prototype } => {
                self.prototypes
                    .insert(prototype.prototype_id.clone(), prototype.clone());
            }
            Event::ResponseIngested { response } => {
                self.responses
                    .insert(response.response_id.clone(), response.clone());
            }
            Event::Screened {
                response_id,
                flags,
                outcome,
                ..
            } => {
                let resp = self
                    .responses
                    .get_mut(response_id)
                    .ok_or_else(|| replay_err(seq, format!("unknown response {response_id}")))?;
                resp.flags = flags.clone();
                let cycle_id = resp.cycle_id.clone();
                match outcome {
                    ScreenOutcome::AutoAccepted => {
                        resp.status = ResponseStatus::Accepted;
                        self.accepted.push(response_id.clone());
                    }
                    ScreenOutcome::Flagged | ScreenOutcome::QueuedClean => {
                        if *outcome == ScreenOutcome::Flagged {
                            resp.status = ResponseStatus::AutoFlagged;
                        }
                        self.review.insert(
                            response_id.clone(),
                            ReviewItem {
                                response_id: response_id.clone(),
                                cycle_id,
                                flags: flags.clone(),
                                decision: None,
                                engineer_id: None,
                                decided_at: None,
                            },
                        );
                    }
                }
                self.screened.insert(response_id.clone());
            }
            Event::Decided {
                response_id,
                decision,
                engineer_id,
            } => {
                let item = self
                    .review
                    .get_mut(response_id)
                    .ok_or_else(|| replay_err(seq, format!("no review item {response_id}")))?;
                if item.decision.is_some() {
                    return Err(replay_err(seq, format!("{response_id} decided twice")));
                }
                item.decision = Some(*decision);
                item.engineer_id = Some(engineer_id.clone());
                item.decided_at = Some(rec.at);
                let resp = self
                    .responses
                    .get_mut(response_id)
                    .ok_or_else(|| replay_err(seq, format!("unknown response {response_id}")))?;
                match decision {
                    Decision::Accept => {
                        resp.status = ResponseStatus::Accepted;
                        self.accepted.push(response_id.clone());
                    }
                    Decision::Reject => resp.status = ResponseStatus::Rejected,
                }
            }
            Event::FeedbackComputed { feedback } => {
                self.feedback.insert(
                    feedback_key(&feedback.cycle_id, &feedback.prototype_id),
                    feedback.clone(),
                );
            }
            Event::ModelUpdated {
                cycle_id: _,
                forgetting,
                rows,
                version,
                metrics,
            } => {
                let next = self
                    .model
                    .with_forgetting(*forgetting)
                    .and_then(|m| m.train(rows))
                    .map_err(|e| replay_err(seq, e.to_string()))?;
                if next.version != *version {
                    return Err(replay_err(
                        seq,
                        format!("model version {} != recorded {version}", next.version),
                    ));
                }
                self.model = next;
                self.trained
                    .extend(rows.iter().map(|r| r.response_id.clone()));
                if let Some(m) = metrics {
                    self.metrics.push(m.clone());
                }
            }
            Event::PlanCreated { plan } => {
                let chosen: BTreeSet<u64> = plan.scope.selected_stories.iter().copied().collect();
                for story in self.stories.values_mut() {
                    if story.cycle_id == plan.cycle_id {
                        story.selected = chosen.contains(&story.story_id);
                    }
                }
                self.plans.insert(plan.cycle_id.clone(), plan.clone());
            }
            Event::StoryDrafted { story } => {
                self.stories.insert(story.story_id, story.clone());
            }
            Event::StoryEstimated { story_id, points } => {
                self.story_mut(seq, *story_id)?.estimate = Some(*points);
            }
            Event::TasksRecorded { story_id, tasks } => {
                self.story_mut(seq, *story_id)?.tasks = tasks.clone();
            }
            Event::DimensionSkipped {
                cycle_id,
                dimension,
                skipped,
            } => {
                let set = self.skipped.entry(cycle_id.clone()).or_default();
                if *skipped {
                    set.insert(*dimension);
                } else {
                    set.remove(dimension);
                }
            }
            Event::CycleClosed {
                cycle_id,
                model_version,
            } => {
                if self.model.version != *model_version {
                    return Err(replay_err(seq, "closing snapshot version mismatch"));
                }
                self.cycle_mut(seq, cycle_id)?.status = CycleStatus::Closed;
                self.model_history.push(CycleModelSnapshot {
                    cycle_id: cycle_id.clone(),
                    model: self.model.clone(),
                });
            }
        }
        self.last_seq = seq;
        Ok(())
    }

    fn cycle_mut(&mut self, seq: u64, id: &str) -> Result<&mut Cycle> {
        self.cycles
            .get_mut(id)
            .ok_or_else(|| replay_err(seq, format!("unknown cycle {id}")))
    }

    fn story_mut(&mut self, seq: u64, id: u64) -> Result<&mut UserStory> {
        self.stories
            .get_mut(&id)
            .ok_or_else(|| replay_err(seq, format!("unknown story {id}")))
    }

    pub fn cycle(&self, id: &str) -> Result<&Cycle> {
        self.cycles
            .get(id)
            .ok_or_else(|| HillError::UnknownCycle(id.to_string()))
    }

    pub fn response(&self, id: &str) -> Result<&SurveyResponse> {
        self.responses
            .get(id)
            .ok_or_else(|| HillError::UnknownResponse(id.to_string()))
    }

    pub fn responses_in_cycle<'a>(&'a self, cycle_id: &'a str) -> impl Iterator<Item = &'a SurveyResponse> + 'a {
        self.responses.values().filter(move |r| r.cycle_id == cycle_id)
    }

    /// Accepted responses in acceptance order, optionally restricted.
    pub fn accepted_responses<'a>(
        &'a self,
        cycle_id: Option<&'a str>,
    ) -> impl Iterator<Item = &'a SurveyResponse> + 'a {
        self.accepted
            .iter()
            .filter_map(|id| self.responses.get(id))
            .filter(move |r| cycle_id.is_none_or(|c| r.cycle_id == c))
    }

    /// One row per accepted response: composites in instrument order as
    /// features, overall rating as target, in acceptance order.
    pub fn training_rows(&self, cycle_id: Option<&str>) -> Vec<TrainingRow> {
        self.accepted_responses(cycle_id)
            .map(|r| TrainingRow {
                response_id: r.response_id.clone(),
                features: composite_scores(r, &self.instrument).features(),
                target: r.overall as f64,
            })
            .collect()
    }

    pub fn open_review_items(&self) -> impl Iterator<Item = &ReviewItem> {
        self.review.values().filter(|i| i.is_open())
    }

    pub fn stories_in_cycle(&self, cycle_id: &str) -> Vec<UserStory> {
        self.stories
            .values()
            .filter(|s| s.cycle_id == cycle_id)
            .cloned()
            .collect()
    }

    pub fn skipped_dimensions(&self, cycle_id: &str) -> Vec<Dimension> {
        self.skipped
            .get(cycle_id)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn next_story_id(&self) -> u64 {
        self.stories.keys().next_back().map_or(1, |k| k + 1)
    }
}
