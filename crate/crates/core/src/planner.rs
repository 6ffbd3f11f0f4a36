//! Sprint planning from dimension feedback: deficiency-first priorities,
//! user stories per dimension category, and time-boxed scope selection.

use serde::{Deserialize, Serialize};

use crate::error::{HillError, Result};
use crate::instrument::Dimension;
use crate::scoring::{CycleRollup, DimensionFeedback};

/// Which feedback statistic ranks the dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningStatistic {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub dimension: Dimension,
    pub value: f64,
    pub iqr: f64,
}

pub fn summaries_from_feedback(fb: &DimensionFeedback, stat: PlanningStatistic) -> Vec<DimensionSummary> {
    Dimension::ALL
        .iter()
        .map(|&d| DimensionSummary {
            dimension: d,
            value: match stat {
                PlanningStatistic::Mean => fb.means[d],
                PlanningStatistic::Median => fb.stats[d].median,
            },
            iqr: fb.stats[d].iqr(),
        })
        .collect()
}

pub fn summaries_from_rollup(r: &CycleRollup, stat: PlanningStatistic) -> Vec<DimensionSummary> {
    Dimension::ALL
        .iter()
        .map(|&d| DimensionSummary {
            dimension: d,
            value: match stat {
                PlanningStatistic::Mean => r.means[d],
                PlanningStatistic::Median => r.medians[d],
            },
            iqr: r.iqrs[d],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityEntry {
    pub dimension: Dimension,
    /// The ranking statistic; the composite median under
    /// [`PlanningStatistic::Median`].
    pub composite_mean: f64,
    pub iqr: f64,
    pub priority: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityBoard {
    pub cycle_id: String,
    pub statistic: PlanningStatistic,
    pub entries: Vec<PriorityEntry>,
}

impl PriorityBoard {
    pub fn priority_of(&self, d: Dimension) -> u8 {
        self.entries
            .iter()
            .find(|e| e.dimension == d)
            .map_or(u8::MAX, |e| e.priority)
    }
}

/// Lowest score first; ties go to the larger IQR, then instrument order.
pub fn prioritize(
    cycle_id: &str,
    summaries: &[DimensionSummary],
    statistic: PlanningStatistic,
) -> Result<PriorityBoard> {
    let mut picked: Vec<DimensionSummary> = Vec::with_capacity(4);
    for d in Dimension::ALL {
        let s = summaries
            .iter()
            .find(|s| s.dimension == d)
            .ok_or_else(|| HillError::MissingDimension(d.to_string()))?;
        if !(s.value.is_finite() && s.iqr.is_finite()) {
            return Err(HillError::NonFiniteInput);
        }
        picked.push(*s);
    }
    picked.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(b.iqr.total_cmp(&a.iqr))
            .then(a.dimension.cmp(&b.dimension))
    });
    Ok(PriorityBoard {
        cycle_id: cycle_id.to_string(),
        statistic,
        entries: picked
            .into_iter()
            .enumerate()
            .map(|(i, s)| PriorityEntry {
                dimension: s.dimension,
                composite_mean: s.value,
                iqr: s.iqr,
                priority: i as u8 + 1,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStory {
    pub story_id: u64,
    pub cycle_id: String,
    pub category: Dimension,
    pub narrative: String,
    pub acceptance_criteria: Vec<String>,
    pub source_comments: Vec<String>,
    pub estimate: Option<u32>,
    pub tasks: Vec<String>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprintScope {
    pub cycle_id: String,
    pub capacity: u32,
    pub selected_stories: Vec<u64>,
    pub total_points: u32,
}

pub fn check_capacity(capacity: i64) -> Result<u32> {
    if capacity <= 0 {
        return Err(HillError::NonPositiveCapacity(capacity));
    }
    u32::try_from(capacity).map_err(|_| HillError::NonPositiveCapacity(capacity))
}

pub fn check_estimate(points: i64) -> Result<u32> {
    if points <= 0 {
        return Err(HillError::NonPositiveEstimate(points));
    }
    u32::try_from(points).map_err(|_| HillError::NonPositiveEstimate(points))
}

/// First-fit selection in (category priority, story id) order: each story
/// is taken if its estimate still fits. Stories of skipped dimensions are
/// not candidates. Unestimated candidates block the whole selection.
pub fn select_first_fit(
    board: &PriorityBoard,
    stories: &[UserStory],
    capacity: u32,
    skipped: &[Dimension],
) -> Result<SprintScope> {
    let mut candidates: Vec<&UserStory> = stories
        .iter()
        .filter(|s| s.cycle_id == board.cycle_id && !skipped.contains(&s.category))
        .collect();
    let unestimated: Vec<u64> = candidates
        .iter()
        .filter(|s| s.estimate.is_none())
        .map(|s| s.story_id)
        .collect();
    if !unestimated.is_empty() {
        return Err(HillError::UnestimatedStories(unestimated));
    }
    candidates.sort_by_key(|s| (board.priority_of(s.category), s.story_id));

    let mut remaining = capacity;
    let mut selected = Vec::new();
    for s in candidates {
        let points = s.estimate.unwrap_or(u32::MAX);
        if points <= remaining {
            remaining -= points;
            selected.push(s.story_id);
        }
    }
    Ok(SprintScope {
        cycle_id: board.cycle_id.clone(),
        capacity,
        selected_stories: selected,
        total_points: capacity - remaining,
    })
}

/// Plan export: board, selected stories with their tasks, and the
/// dimensions the team chose not to address.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub cycle_id: String,
    pub board: PriorityBoard,
    pub scope: SprintScope,
    pub stories: Vec<UserStory>,
    pub skipped_dimensions: Vec<Dimension>,
}
