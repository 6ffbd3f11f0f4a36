//! Incremental preference model: linear ridge regression from the four
//! composite scores (plus intercept) to the overall rating, trained by
//! recursive least squares with exponential forgetting.

use chrono::{DateTime, Utc};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HillError, Result};
use crate::instrument::RatingScale;

/// Four composite features followed by the intercept.
pub const MODEL_DIM: usize = 5;
pub const DEFAULT_FORGETTING: f64 = 0.98;
pub const DEFAULT_RIDGE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub response_id: String,
    pub features: [f64; 4],
    pub target: f64,
}

/// Model snapshot. `precision` is the RLS gain matrix `P`, the inverse of
/// the forgetting-weighted regularized Gram matrix `λ-weighted XᵀX + α·I`;
/// it starts at `I/α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub weights: [f64; MODEL_DIM],
    pub precision: [[f64; MODEL_DIM]; MODEL_DIM],
    pub forgetting: f64,
    pub ridge: f64,
    pub updates_seen: u64,
    pub version: u64,
}

fn check_hyperparameters(ridge: f64, forgetting: f64) -> Result<()> {
    if !(ridge.is_finite() && ridge > 0.0) {
        return Err(HillError::InvalidHyperparameter(format!("ridge must be > 0, got {ridge}")));
    }
    if !(forgetting > 0.0 && forgetting <= 1.0) {
        return Err(HillError::InvalidHyperparameter(format!(
            "forgetting must be in (0, 1], got {forgetting}"
        )));
    }
    Ok(())
}

pub fn init_model(ridge: f64, forgetting: f64) -> Result<ModelState> {
    check_hyperparameters(ridge, forgetting)?;
    let mut precision = [[0.0; MODEL_DIM]; MODEL_DIM];
    for (i, row) in precision.iter_mut().enumerate() {
        row[i] = 1.0 / ridge;
    }
    Ok(ModelState {
        weights: [0.0; MODEL_DIM],
        precision,
        forgetting,
        ridge,
        updates_seen: 0,
        version: 0,
    })
}

/// One RLS step with forgetting `lambda` on an arbitrary dimension:
/// `P ← (P − P·x·xᵀ·P / (λ + xᵀ·P·x)) / λ`, then `w ← w + P·x·(y − xᵀ·w)`
/// with the updated `P`. `P` is re-symmetrized afterwards.
pub fn rls_step(p: &mut DMatrix<f64>, w: &mut DVector<f64>, x: &DVector<f64>, y: f64, lambda: f64) {
    let innovation = y - x.dot(w);
    let px = &*p * x;
    let denom = lambda + x.dot(&px);
    let mut next = (&*p - &px * px.transpose() / denom) / lambda;
    let sym = (&next + next.transpose()) * 0.5;
    next.copy_from(&sym);
    *p = next;
    *w += &*p * x * innovation;
}

pub fn feature_vector(features: &[f64; 4]) -> DVector<f64> {
    DVector::from_iterator(
        MODEL_DIM,
        features.iter().copied().chain(std::iter::once(1.0)),
    )
}

impl ModelState {
    pub fn precision_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(MODEL_DIM, MODEL_DIM, |i, j| self.precision[i][j])
    }

    pub fn weight_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.weights)
    }

    /// Returns the next version after learning from one row.
    pub fn update(&self, features: &[f64; 4], target: f64) -> Result<ModelState> {
        if !target.is_finite() || features.iter().any(|v| !v.is_finite()) {
            return Err(HillError::NonFiniteInput);
        }
        let mut p = self.precision_matrix();
        let mut w = self.weight_vector();
        rls_step(&mut p, &mut w, &feature_vector(features), target, self.forgetting);
        if p.iter().chain(w.iter()).any(|v| !v.is_finite()) {
            return Err(HillError::NonFiniteInput);
        }
        let mut next = self.clone();
        for i in 0..MODEL_DIM {
            next.weights[i] = w[i];
            for j in 0..MODEL_DIM {
                next.precision[i][j] = p[(i, j)];
            }
        }
        next.updates_seen += 1;
        next.version += 1;
        Ok(next)
    }

    /// Folds `rows` in order.
    pub fn train(&self, rows: &[TrainingRow]) -> Result<ModelState> {
        rows.iter()
            .try_fold(self.clone(), |m, r| m.update(&r.features, r.target))
    }

    pub fn with_forgetting(&self, forgetting: f64) -> Result<ModelState> {
        check_hyperparameters(self.ridge, forgetting)?;
        Ok(ModelState {
            forgetting,
            ..self.clone()
        })
    }

    pub fn predict_raw(&self, features: &[f64; 4]) -> f64 {
        features
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum::<f64>()
            + self.weights[MODEL_DIM - 1]
    }

    pub fn predict(&self, features: &[f64; 4], scale: RatingScale) -> Result<Prediction> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(HillError::NonFiniteInput);
        }
        let raw = self.predict_raw(features);
        Ok(Prediction {
            raw,
            clamped: scale.clamp(raw),
            model_version: self.version,
        })
    }

    pub fn evaluate(&self, holdout: &[TrainingRow], at: DateTime<Utc>) -> Result<ModelMetrics> {
        if holdout.is_empty() {
            return Err(HillError::EmptyHoldout);
        }
        let n = holdout.len() as f64;
        let (mut sq, mut abs) = (0.0, 0.0);
        for row in holdout {
            let e = self.predict_raw(&row.features) - row.target;
            sq += e * e;
            abs += e.abs();
        }
        let rmse = (sq / n).sqrt();
        // mae ≤ rmse holds mathematically; rounding can flip the last ulp.
        let mae = (abs / n).min(rmse);
        Ok(ModelMetrics {
            rmse,
            mae,
            n_eval: holdout.len(),
            computed_at: at,
            model_version: self.version,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub raw: f64,
    pub clamped: f64,
    pub model_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub n_eval: usize,
    pub computed_at: DateTime<Utc>,
    pub model_version: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn row(features: [f64; 4], target: f64) -> TrainingRow {
        TrainingRow {
            response_id: "r".into(),
            features,
            target,
        }
    }

    #[test]
    fn fresh_model() {
        let m = init_model(1.0, 1.0).unwrap();
        assert_eq!(m.weights, [0.0; 5]);
        assert_eq!(m.precision_matrix(), DMatrix::identity(5, 5));
        assert_eq!((m.updates_seen, m.version), (0, 0));
        let p = m.predict(&[6.0, 2.0, 3.0, 7.0], RatingScale::default()).unwrap();
        assert_eq!(p.raw, 0.0);
        assert_eq!(p.clamped, 1.0);
    }

    #[test]
    fn hyperparameter_bounds() {
        assert!(init_model(0.0, 1.0).is_err());
        assert!(init_model(1.0, 0.0).is_err());
        assert!(init_model(1.0, 1.01).is_err());
        assert!(init_model(1.0, 1.0).is_ok());
    }

    #[test]
    fn scalar_update_matches_closed_form_ridge() {
        let mut p = DMatrix::identity(1, 1);
        let mut w = DVector::zeros(1);
        rls_step(&mut p, &mut w, &DVector::from_element(1, 1.0), 2.0, 1.0);
        // (xᵀx + α)⁻¹ xᵀy = 2 / 2
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_innovation_keeps_weights() {
        let m = init_model(1.0, 0.9)
            .unwrap()
            .train(&[row([5.0, 3.0, 4.0, 2.0], 6.0), row([2.0, 2.0, 6.0, 5.0], 3.0)])
            .unwrap();
        let x = [4.0, 4.0, 1.0, 6.0];
        let next = m.update(&x, m.predict_raw(&x)).unwrap();
        for (a, b) in m.weights.iter().zip(&next.weights) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(next.version, m.version + 1);
    }

    #[test]
    fn non_finite_rejected() {
        let m = init_model(1.0, 1.0).unwrap();
        assert_eq!(m.update(&[f64::NAN, 1.0, 1.0, 1.0], 1.0), Err(HillError::NonFiniteInput));
        assert_eq!(m.update(&[1.0; 4], f64::INFINITY), Err(HillError::NonFiniteInput));
    }

    #[test]
    fn metrics_identities() {
        let at = Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap();
        let m = init_model(1.0, 1.0).unwrap();
        let exact = m.evaluate(&[row([1.0; 4], 0.0), row([2.0; 4], 0.0)], at).unwrap();
        assert_eq!((exact.rmse, exact.mae), (0.0, 0.0));
        let one = m.evaluate(&[row([1.0; 4], 2.0)], at).unwrap();
        assert_eq!((one.rmse, one.mae, one.n_eval), (2.0, 2.0, 1));
        assert_eq!(m.evaluate(&[], at), Err(HillError::EmptyHoldout));
    }
}
