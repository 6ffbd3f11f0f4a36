//! Survey responses, prototypes and time-boxed cycles, plus validation of
//! the response interchange document.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::value::RawValue;

use crate::error::{HillError, Result};
use crate::gate::Flag;
use crate::instrument::{Dimension, Instrument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleStatus {
    Planned,
    Running,
    Testing,
    Closed,
}

impl CycleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleStatus::Planned => "planned",
            CycleStatus::Running => "running",
            CycleStatus::Testing => "testing",
            CycleStatus::Closed => "closed",
        }
    }

    /// Manual transitions only move one step forward and never close a
    /// cycle; closing is the pipeline's job.
    pub fn next_manual(self) -> Option<CycleStatus> {
        match self {
            CycleStatus::Planned => Some(CycleStatus::Running),
            CycleStatus::Running => Some(CycleStatus::Testing),
            CycleStatus::Testing | CycleStatus::Closed => None,
        }
    }
}

impl fmt::Display for CycleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One time-boxed iteration. `end` is fixed at creation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub cycle_id: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub status: CycleStatus,
}

impl Cycle {
    pub fn new(cycle_id: &str, start: NaiveDate, timebox_days: i64) -> Result<Self> {
        if cycle_id.trim().is_empty() {
            return Err(HillError::Malformed("empty cycle id".into()));
        }
        if timebox_days <= 0 {
            return Err(HillError::InvalidTimebox(format!(
                "timebox must be positive, got {timebox_days} days"
            )));
        }
        let end = start
            .checked_add_signed(chrono::Duration::days(timebox_days))
            .ok_or_else(|| HillError::InvalidTimebox("end date overflows".into()))?;
        Ok(Cycle {
            cycle_id: cycle_id.to_string(),
            start,
            end,
            status: CycleStatus::Planned,
        })
    }

    pub fn timebox_days(&self) -> i64 {
        (self.end - self.start).num_days()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prototype {
    pub prototype_id: String,
    pub cycle_id: String,
    pub title: String,
    #[serde(default)]
    pub display_assets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Pending,
    AutoFlagged,
    Accepted,
    Rejected,
}

impl ResponseStatus {
    pub fn is_decided(self) -> bool {
        matches!(self, ResponseStatus::Accepted | ResponseStatus::Rejected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub response_id: String,
    pub respondent_id: String,
    pub prototype_id: String,
    pub cycle_id: String,
    pub submitted_at: DateTime<Utc>,
    pub ratings: BTreeMap<String, i64>,
    pub overall: i64,
    pub comments: Vec<String>,
    pub status: ResponseStatus,
    pub flags: Vec<Flag>,
}

impl SurveyResponse {
    /// Ratings in instrument item order.
    pub fn ordered_ratings(&self, instrument: &Instrument) -> Vec<f64> {
        instrument
            .items()
            .map(|item| self.ratings.get(item).copied().unwrap_or_default() as f64)
            .collect()
    }

    pub fn item_ratings(&self, instrument: &Instrument, dimension: Dimension) -> [i64; 3] {
        let items = instrument.items_of(dimension);
        [0, 1, 2].map(|i| self.ratings.get(&items[i]).copied().unwrap_or_default())
    }

    pub fn to_document(&self) -> ResponseDocument {
        ResponseDocument {
            response_id: self.response_id.clone(),
            respondent_id: self.respondent_id.clone(),
            prototype_id: self.prototype_id.clone(),
            cycle_id: self.cycle_id.clone(),
            submitted_at: self.submitted_at,
            ratings: self.ratings.clone(),
            overall: self.overall,
            comments: self.comments.clone(),
        }
    }
}

/// The response interchange document, one per record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseDocument {
    pub response_id: String,
    pub respondent_id: String,
    pub prototype_id: String,
    pub cycle_id: String,
    pub submitted_at: DateTime<Utc>,
    pub ratings: BTreeMap<String, i64>,
    pub overall: i64,
    pub comments: Vec<String>,
}

/// Wire form with the ratings object kept as raw entries so repeated keys
/// and non-integer values can be reported instead of silently merged.
#[derive(Debug, Deserialize)]
struct RawDocument {
    response_id: String,
    respondent_id: String,
    prototype_id: String,
    cycle_id: String,
    submitted_at: DateTime<Utc>,
    ratings: RatingEntries,
    overall: serde_json::Value,
    #[serde(default)]
    comments: Vec<String>,
}

#[derive(Debug)]
struct RatingEntries(Vec<(String, serde_json::Value)>);

impl<'de> Deserialize<'de> for RatingEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = RatingEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of item ratings")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RatingEntries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, serde_json::Value>()? {
                    out.push((k, v));
                }
                Ok(RatingEntries(out))
            }
        }
        d.deserialize_map(EntriesVisitor)
    }
}

/// Parses and validates a single interchange record into a pending response.
pub fn parse_response(text: &str, instrument: &Instrument) -> Result<SurveyResponse> {
    let raw: RawDocument =
        serde_json::from_str(text).map_err(|e| HillError::Malformed(e.to_string()))?;
    validate_raw(raw, instrument)
}

fn integer(field: &str, v: &serde_json::Value) -> Result<i64> {
    v.as_i64()
        .ok_or_else(|| HillError::Malformed(format!("{field:?} must be an integer, got {v}")))
}

fn validate_raw(raw: RawDocument, instrument: &Instrument) -> Result<SurveyResponse> {
    for (name, v) in [
        ("response_id", &raw.response_id),
        ("respondent_id", &raw.respondent_id),
        ("prototype_id", &raw.prototype_id),
        ("cycle_id", &raw.cycle_id),
    ] {
        if v.trim().is_empty() {
            return Err(HillError::Malformed(format!("{name} is empty")));
        }
    }
    let scale = instrument.scale();
    let known: BTreeSet<&str> = instrument.items().collect();
    let mut ratings = BTreeMap::new();
    for (key, value) in &raw.ratings.0 {
        if !known.contains(key.as_str()) {
            return Err(HillError::UnknownItem(key.clone()));
        }
        let r = integer(key, value)?;
        if ratings.insert(key.clone(), r).is_some() {
            return Err(HillError::DuplicateItem(key.clone()));
        }
    }
    if let Some(missing) = instrument.items().find(|i| !ratings.contains_key(*i)) {
        return Err(HillError::MissingItem(missing.to_string()));
    }
    for (key, &r) in &ratings {
        if !scale.contains(r) {
            return Err(HillError::OutOfRange {
                field: key.clone(),
                value: r,
                min: scale.min,
                max: scale.max,
            });
        }
    }
    let overall = integer("overall", &raw.overall)?;
    if !scale.contains(overall) {
        return Err(HillError::OutOfRange {
            field: "overall".into(),
            value: overall,
            min: scale.min,
            max: scale.max,
        });
    }
    Ok(SurveyResponse {
        response_id: raw.response_id,
        respondent_id: raw.respondent_id,
        prototype_id: raw.prototype_id,
        cycle_id: raw.cycle_id,
        submitted_at: raw.submitted_at,
        ratings,
        overall,
        comments: raw.comments,
        status: ResponseStatus::Pending,
        flags: Vec::new(),
    })
}

/// Validation failure of one record in a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordError {
    pub index: usize,
    pub response_id: Option<String>,
    pub error: String,
    #[serde(skip)]
    pub cause: HillError,
}

impl RecordError {
    pub fn new(index: usize, response_id: Option<String>, cause: HillError) -> Self {
        RecordError {
            index,
            response_id,
            error: cause.to_string(),
            cause,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub stored: usize,
    pub errors: Vec<RecordError>,
}

/// Splits a batch (a JSON array or JSON Lines) into raw record texts.
/// A batch that is not even well-formed as a container is one error.
pub fn split_batch(text: &str) -> std::result::Result<Vec<String>, HillError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        let items: Vec<Box<RawValue>> =
            serde_json::from_str(trimmed).map_err(|e| HillError::Malformed(e.to_string()))?;
        Ok(items.into_iter().map(|r| r.get().to_string()).collect())
    } else {
        Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect())
    }
}

/// Best-effort `response_id` of a record that failed validation.
pub fn sniff_response_id(text: &str) -> Option<String> {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()?
        .get("response_id")?
        .as_str()
        .map(str::to_string)
}

#[cfg(test)]
pub(crate) mod fixtures {
    pub fn doc(id: &str, cycle: &str, ratings: &[i64; 12], overall: i64) -> String {
        let inst = crate::instrument::default_instrument();
        let r: serde_json::Map<String, serde_json::Value> = inst
            .items()
            .zip(ratings)
            .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
            .collect();
        serde_json::json!({
            "response_id": id,
            "respondent_id": format!("u-{id}"),
            "prototype_id": "p1",
            "cycle_id": cycle,
            "submitted_at": "2026-03-02T10:00:00Z",
            "ratings": r,
            "overall": overall,
            "comments": [],
        })
        .to_string()
    }
}
