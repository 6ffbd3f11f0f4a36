//! Internal-consistency reliability of a multi-item scale.

use nalgebra::DMatrix;

use crate::error::{HillError, Result};
use crate::linalg::{ensure_finite, sample_variance};

/// Cronbach's alpha over an `n × k` ratings matrix (rows are respondents):
/// `k/(k−1) · (1 − Σ item variance / total-score variance)` with `n − 1`
/// sample variances. Never exceeds 1; negative when items covary negatively.
pub fn cronbach_alpha(ratings: &DMatrix<f64>) -> Result<f64> {
    let (n, k) = ratings.shape();
    if n < 2 {
        return Err(HillError::TooFewRows { needed: 2, got: n });
    }
    if k < 2 {
        return Err(HillError::TooFewColumns { needed: 2, got: k });
    }
    ensure_finite(ratings)?;

    let item_var_sum: f64 = (0..k)
        .map(|j| sample_variance(&ratings.column(j).iter().copied().collect::<Vec<_>>()))
        .sum();
    let totals: Vec<f64> = (0..n).map(|i| ratings.row(i).sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(HillError::DegenerateVariance);
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var_sum / total_var))
}
