//! Automatic screening for straight-lining, acquiescence and composite
//! outliers, and the review items a quality engineer decides on.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{HillError, Result};
use crate::ingest::SurveyResponse;
use crate::instrument::{Dimension, Instrument};
use crate::linalg::{mean, sample_sd};
use crate::scoring::{composite_scores, quantile_sorted, tukey_fences};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    Straightline,
    Acquiescence,
    Outlier,
}

impl FlagKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagKind::Straightline => "straightline",
            FlagKind::Acquiescence => "acquiescence",
            FlagKind::Outlier => "outlier",
        }
    }
}

/// Screening advice. `evidence` is the response sd for straight-lining,
/// the mean rating for acquiescence, and the signed z-score or the
/// distance past the violated fence for outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub kind: FlagKind,
    pub detail: String,
    pub evidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePolicy {
    pub sd_threshold: f64,
    pub acquiescence_mean_margin: f64,
    pub z_threshold: f64,
    pub fence_k: f64,
    pub auto_accept_clean: bool,
}

impl Default for GatePolicy {
    fn default() -> Self {
        GatePolicy {
            sd_threshold: 0.5,
            acquiescence_mean_margin: 1.0,
            z_threshold: 3.0,
            fence_k: 1.5,
            auto_accept_clean: true,
        }
    }
}

impl GatePolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sd_threshold", self.sd_threshold),
            ("acquiescence_mean_margin", self.acquiescence_mean_margin),
            ("z_threshold", self.z_threshold),
            ("fence_k", self.fence_k),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(HillError::InvalidPolicy(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Below this many batch composites the outlier check is skipped.
pub const MIN_OUTLIER_BATCH: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub flags: Vec<Flag>,
    /// Checks that could not run, with the reason.
    pub notes: Vec<String>,
}

impl Screening {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Screens one response against the composites of its cycle batch.
/// Pure in `(response, batch, policy)`.
pub fn auto_screen(
    response: &SurveyResponse,
    instrument: &Instrument,
    batch: &[[f64; 4]],
    policy: &GatePolicy,
) -> Result<Screening> {
    policy.validate()?;
    if batch.is_empty() {
        return Err(HillError::EmptyInput);
    }
    let mut flags = Vec::new();
    let mut notes = Vec::new();

    let ratings = response.ordered_ratings(instrument);
    let sd = sample_sd(&ratings);
    let avg = mean(&ratings);
    if sd < policy.sd_threshold {
        flags.push(Flag {
            kind: FlagKind::Straightline,
            detail: format!("rating sd {sd:.3} < {}", policy.sd_threshold),
            evidence: sd,
        });
        let bar = instrument.scale().midpoint() + policy.acquiescence_mean_margin;
        if avg > bar {
            flags.push(Flag {
                kind: FlagKind::Acquiescence,
                detail: format!("straight-lined at mean {avg:.3} > {bar}"),
                evidence: avg,
            });
        }
    }

    if batch.len() < MIN_OUTLIER_BATCH {
        notes.push(format!(
            "outlier check skipped: batch of {} < {MIN_OUTLIER_BATCH}",
            batch.len()
        ));
    } else {
        let scores = composite_scores(response, instrument);
        for d in Dimension::ALL {
            let value = scores.scores[d];
            let mut column: Vec<f64> = batch.iter().map(|c| c[d.index()]).collect();
            if let Some(flag) = outlier_flag(d, value, &mut column, policy) {
                flags.push(flag);
            }
        }
    }

    flags.sort_by_key(|f| f.kind);
    Ok(Screening { flags, notes })
}

fn outlier_flag(d: Dimension, value: f64, column: &mut [f64], policy: &GatePolicy) -> Option<Flag> {
    let m = mean(column);
    let sd = sample_sd(column);
    if sd > 0.0 {
        let z = (value - m) / sd;
        if z.abs() > policy.z_threshold {
            return Some(Flag {
                kind: FlagKind::Outlier,
                detail: format!("{d} composite {value:.3}: z={z:+.3} beyond ±{}", policy.z_threshold),
                evidence: z,
            });
        }
    }
    column.sort_by(f64::total_cmp);
    let (lo, hi) = tukey_fences(
        quantile_sorted(column, 0.25),
        quantile_sorted(column, 0.75),
        policy.fence_k,
    );
    let beyond = if value < lo {
        lo - value
    } else if value > hi {
        value - hi
    } else {
        return None;
    };
    Some(Flag {
        kind: FlagKind::Outlier,
        detail: format!("{d} composite {value:.3} outside fences [{lo:.3}, {hi:.3}]"),
        evidence: beyond,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub response_id: String,
    pub cycle_id: String,
    pub flags: Vec<Flag>,
    pub decision: Option<Decision>,
    pub engineer_id: Option<String>,
    pub decided_at: Option<DateTime<Utc>>,
}

impl ReviewItem {
    pub fn is_open(&self) -> bool {
        self.decision.is_none()
    }
}
