//! Reference implementations used to cross-check the library. Each takes a
//! different computational route from the code under test.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_pcg::Pcg32;

/// Alpha from the full sample covariance matrix: the total-score variance
/// is the sum of every covariance entry, the item variances its trace.
/// `None` when the total score is constant.
pub fn alpha(data: &DMatrix<f64>) -> Option<f64> {
    let (n, k) = data.shape();
    let means: Vec<f64> = (0..k).map(|j| data.column(j).sum() / n as f64).collect();
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let s: f64 = (0..n)
                .map(|i| (data[(i, a)] - means[a]) * (data[(i, b)] - means[b]))
                .sum();
            cov[(a, b)] = s / (n as f64 - 1.0);
        }
    }
    let total = cov.sum();
    if total.abs() < 1e-12 {
        return None;
    }
    let k = k as f64;
    Some(k / (k - 1.0) * (1.0 - cov.trace() / total))
}

/// Linear-interpolation quantile at rank `p·(n−1)` of a sorted slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor();
    let hi = h.ceil();
    let (a, b) = (sorted[lo as usize], sorted[hi as usize]);
    if lo == hi {
        a
    } else {
        a + (h - lo) * (b - a)
    }
}

#[derive(Debug, PartialEq)]
pub struct Boxplot {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

pub fn boxplot(values: &[f64]) -> Boxplot {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile(&s, 0.25);
    let median = quantile(&s, 0.5);
    let q3 = quantile(&s, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let mut lower_whisker = q1;
    let mut upper_whisker = q3;
    let mut outliers = Vec::new();
    for &v in &s {
        if v < lo || v > hi {
            outliers.push(v);
        } else {
            lower_whisker = lower_whisker.min(v);
            upper_whisker = upper_whisker.max(v);
        }
    }
    Boxplot {
        q1,
        median,
        q3,
        lower_whisker,
        upper_whisker,
        outliers,
    }
}

/// Batch ridge with intercept column: `(αI + XᵀX)⁻¹ Xᵀy`.
pub fn batch_ridge(features: &[[f64; 4]], targets: &[f64], ridge: f64) -> DVector<f64> {
    let n = features.len();
    let x = DMatrix::from_fn(n, 5, |i, j| if j < 4 { features[i][j] } else { 1.0 });
    let y = DVector::from_column_slice(targets);
    let gram = x.transpose() * &x + DMatrix::identity(5, 5) * ridge;
    gram.cholesky().expect("regularized gram is SPD").solve(&(x.transpose() * y))
}

/// Uniform-ish random orthogonal matrix from the QR factors of a Gaussian
/// matrix, with the sign convention that makes `R`'s diagonal positive.
pub fn random_orthogonal(k: usize, rng: &mut Pcg32) -> DMatrix<f64> {
    let g = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random correlation matrix from Gaussian data with a few shared factors.
pub fn random_correlation(p: usize, n: usize, rng: &mut Pcg32) -> DMatrix<f64> {
    let shared = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let mix = DMatrix::from_fn(3, p, |_, _| rng.random_range(-1.0..1.0));
    let noise = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let data = shared * mix + noise;
    let means = data.row_mean();
    let centered = DMatrix::from_fn(n, p, |i, j| data[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let d: Vec<f64> = (0..p).map(|i| cov[(i, i)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { cov[(i, j)] / (d[i] * d[j]) })
}

/// Priority order by explicit stable sort on (value, −iqr, index).
pub fn priority_order(values: [f64; 4], iqrs: [f64; 4]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap()
            .then(iqrs[b].partial_cmp(&iqrs[a]).unwrap())
            .then(a.cmp(&b))
    });
    idx
}
