//! Composite scores per response and boxplot feedback per dimension.

use std::collections::BTreeMap;
use std::ops::{Index, IndexMut};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HillError, Result};
use crate::ingest::SurveyResponse;
use crate::instrument::{Dimension, Instrument};

/// One value per design dimension, serialized as an object keyed by
/// dimension name.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerDimension<T>(pub [T; 4]);

impl<T> PerDimension<T> {
    pub fn from_fn(mut f: impl FnMut(Dimension) -> T) -> Self {
        PerDimension(Dimension::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Dimension, &T)> {
        Dimension::ALL.into_iter().zip(self.0.iter())
    }
}

impl<T> Index<Dimension> for PerDimension<T> {
    type Output = T;
    fn index(&self, d: Dimension) -> &T {
        &self.0[d.index()]
    }
}

impl<T> IndexMut<Dimension> for PerDimension<T> {
    fn index_mut(&mut self, d: Dimension) -> &mut T {
        &mut self.0[d.index()]
    }
}

impl<T: Serialize> Serialize for PerDimension<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_map(self.iter().map(|(d, v)| (d.as_str(), v)))
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for PerDimension<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut map = BTreeMap::<Dimension, T>::deserialize(d)?;
        let mut take = |dim: Dimension| {
            map.remove(&dim)
                .ok_or_else(|| D::Error::custom(format!("missing dimension {dim}")))
        };
        Ok(PerDimension([
            take(Dimension::Novelty)?,
            take(Dimension::Energy)?,
            take(Dimension::Simplicity)?,
            take(Dimension::Tool)?,
        ]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores {
    pub response_id: String,
    pub scores: PerDimension<f64>,
}

impl DimensionScores {
    /// Features in instrument order.
    pub fn features(&self) -> [f64; 4] {
        self.scores.0
    }
}

/// Mean of each dimension's three item ratings.
pub fn composite_scores(response: &SurveyResponse, instrument: &Instrument) -> DimensionScores {
    DimensionScores {
        response_id: response.response_id.clone(),
        scores: PerDimension::from_fn(|d| {
            let sum: i64 = response.item_ratings(instrument, d).iter().sum();
            sum as f64 / 3.0
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

impl BoxplotStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

pub const TUKEY_K: f64 = 1.5;

/// Quantile of a sorted sample by linear interpolation at `p·(n−1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Inclusive Tukey fences `[q1 − k·IQR, q3 + k·IQR]`.
pub fn tukey_fences(q1: f64, q3: f64, k: f64) -> (f64, f64) {
    let iqr = q3 - q1;
    (q1 - k * iqr, q3 + k * iqr)
}

/// Five-number summary, 1.5·IQR fences, whiskers and outliers. Whiskers
/// sit on the most extreme values inside the fences, pulled back to the
/// quartile when no such value lies beyond it. Outliers come out ascending.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(HillError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HillError::NonFiniteInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let (lo_fence, hi_fence) = tukey_fences(q1, q3, TUKEY_K);

    let inside = || sorted.iter().copied().filter(|&v| v >= lo_fence && v <= hi_fence);
    let lower_whisker = inside().next().map_or(q1, |v| v.min(q1));
    let upper_whisker = inside().next_back().map_or(q3, |v| v.max(q3));
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();

    Ok(BoxplotStats {
        n: sorted.len(),
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        lower_whisker,
        upper_whisker,
        outliers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionFeedback {
    pub cycle_id: String,
    pub prototype_id: String,
    pub n: usize,
    pub stats: PerDimension<BoxplotStats>,
    pub means: PerDimension<f64>,
}

/// Aggregates composite scores of accepted responses for one prototype.
pub fn feedback_from_scores(
    cycle_id: &str,
    prototype_id: &str,
    scores: &[DimensionScores],
) -> Result<DimensionFeedback> {
    if scores.is_empty() {
        return Err(HillError::NoAcceptedData {
            cycle: cycle_id.to_string(),
            prototype: Some(prototype_id.to_string()),
        });
    }
    let mut stats = Vec::with_capacity(4);
    for d in Dimension::ALL {
        let column: Vec<f64> = scores.iter().map(|s| s.scores[d]).collect();
        stats.push(boxplot_stats(&column)?);
    }
    let means = PerDimension::from_fn(|d| {
        scores.iter().map(|s| s.scores[d]).sum::<f64>() / scores.len() as f64
    });
    let stats: [BoxplotStats; 4] = stats.try_into().expect("four dimensions");
    Ok(DimensionFeedback {
        cycle_id: cycle_id.to_string(),
        prototype_id: prototype_id.to_string(),
        n: scores.len(),
        stats: PerDimension(stats),
        means,
    })
}

/// Cycle-level summary across prototypes: means of the per-prototype
/// means, medians and IQRs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRollup {
    pub cycle_id: String,
    pub prototypes: Vec<String>,
    pub n: usize,
    pub means: PerDimension<f64>,
    pub medians: PerDimension<f64>,
    pub iqrs: PerDimension<f64>,
}

pub fn rollup(cycle_id: &str, feedback: &[DimensionFeedback]) -> Result<CycleRollup> {
    if feedback.is_empty() {
        return Err(HillError::NoAcceptedData {
            cycle: cycle_id.to_string(),
            prototype: None,
        });
    }
    let k = feedback.len() as f64;
    let avg = |f: &dyn Fn(&DimensionFeedback, Dimension) -> f64| {
        PerDimension::from_fn(|d| feedback.iter().map(|fb| f(fb, d)).sum::<f64>() / k)
    };
    Ok(CycleRollup {
        cycle_id: cycle_id.to_string(),
        prototypes: feedback.iter().map(|f| f.prototype_id.clone()).collect(),
        n: feedback.iter().map(|f| f.n).sum(),
        means: avg(&|fb, d| fb.means[d]),
        medians: avg(&|fb, d| fb.stats[d].median),
        iqrs: avg(&|fb, d| fb.stats[d].iqr()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_response;
    use crate::ingest::fixtures::doc;
    use crate::instrument::default_instrument;
    use proptest::prelude::*;

    #[test]
    fn novelty_is_item_mean() {
        let inst = default_instrument();
        let r = parse_response(&doc("r", "c", &[6, 5, 7, 1, 1, 1, 2, 2, 2, 3, 3, 4], 4), &inst).unwrap();
        let s = composite_scores(&r, &inst);
        assert_eq!(s.scores[Dimension::Novelty], 6.0);
        assert_eq!(s.scores[Dimension::Energy], 1.0);
        assert!((s.scores[Dimension::Tool] - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response() {
        let inst = default_instrument();
        let r = parse_response(&doc("r", "c", &[4; 12], 4), &inst).unwrap();
        assert_eq!(composite_scores(&r, &inst).scores.0, [4.0; 4]);
    }

    #[test]
    fn singleton_boxplot() {
        let b = boxplot_stats(&[5.0]).unwrap();
        for v in [b.min, b.q1, b.median, b.q3, b.max, b.lower_whisker, b.upper_whisker] {
            assert_eq!(v, 5.0);
        }
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn worked_boxplot() {
        let b = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 10.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!(b.upper_whisker, 4.0);
        assert_eq!(b.lower_whisker, 1.0);
        assert_eq!(b.outliers, vec![10.0]);
    }

    #[test]
    fn whisker_pulled_back_to_quartile() {
        // q1 interpolates to 7.5 while the only lower value is an outlier.
        let b = boxplot_stats(&[0.0, 10.0, 10.0, 10.0]).unwrap();
        assert_eq!(b.q1, 7.5);
        assert_eq!(b.outliers, vec![0.0]);
        assert_eq!(b.lower_whisker, 7.5);
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(boxplot_stats(&[]), Err(HillError::EmptyInput));
    }

    #[test]
    fn per_dimension_serializes_as_object() {
        let p = PerDimension([1.0, 2.0, 3.0, 4.0]);
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"novelty":1.0,"energy":2.0,"simplicity":3.0,"tool":4.0}"#);
        let back: PerDimension<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<PerDimension<f64>>(r#"{"novelty":1.0}"#).is_err());
    }

    proptest! {
        #[test]
        fn ordering_chain_holds(values in prop::collection::vec(-50.0f64..50.0, 1..120)) {
            let b = boxplot_stats(&values).unwrap();
            prop_assert!(b.min <= b.lower_whisker);
            prop_assert!(b.lower_whisker <= b.q1);
            prop_assert!(b.q1 <= b.median && b.median <= b.q3);
            prop_assert!(b.q3 <= b.upper_whisker && b.upper_whisker <= b.max);
            let (lo, hi) = tukey_fences(b.q1, b.q3, TUKEY_K);
            let expected: Vec<f64> = {
                let mut v: Vec<f64> = values.iter().copied().filter(|&v| v < lo || v > hi).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            prop_assert_eq!(&b.outliers, &expected);
        }

        #[test]
        fn permutation_invariant(mut values in prop::collection::vec(-5.0f64..5.0, 1..60)) {
            let a = boxplot_stats(&values).unwrap();
            values.sort_by(f64::total_cmp);
            values.reverse();
            prop_assert_eq!(a, boxplot_stats(&values).unwrap());
        }

        #[test]
        fn raising_an_item_never_lowers_its_dimension(
            ratings in prop::array::uniform12(1i64..7),
            item in 0usize..12,
        ) {
            let inst = default_instrument();
            let base = parse_response(&doc("r", "c", &ratings, 4), &inst).unwrap();
            let mut raised = ratings;
            raised[item] += 1;
            let up = parse_response(&doc("r", "c", &raised, 4), &inst).unwrap();
            let d = inst.dimension_at(item);
            prop_assert!(composite_scores(&up, &inst).scores[d] >= composite_scores(&base, &inst).scores[d]);
        }
    }
}
