//! Exploratory factor analysis of the instrument: principal-component
//! extraction on the item correlation matrix, varimax rotation, and the
//! convergent/discriminant validity report.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HillError, Result};
use crate::instrument::{Dimension, Instrument, ITEMS_PER_DIMENSION};
use crate::linalg::{self, correlation_matrix, jacobi_eigen, matrix_to_rows};
use crate::reliability::cronbach_alpha;

pub const DEFAULT_FACTORS: usize = 4;
pub const VARIMAX_MAX_SWEEPS: usize = 100;
pub const VARIMAX_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingMatrix {
    /// `p × k`, column `j` is eigenvector `j` scaled by `sqrt(eigenvalue j)`.
    pub loadings: DMatrix<f64>,
    /// All `p` eigenvalues of the correlation matrix, descending.
    pub eigenvalues: DVector<f64>,
    /// Sum of the top `k` eigenvalues over `p`.
    pub explained_variance_fraction: f64,
}

/// Extracts `k` principal factors from an `n × p` data matrix. Requires
/// `n > p` and no constant column.
pub fn extract_factors(data: &DMatrix<f64>, k: usize) -> Result<LoadingMatrix> {
    let (n, p) = data.shape();
    if n <= p {
        return Err(HillError::TooFewRows {
            needed: p + 1,
            got: n,
        });
    }
    let corr = correlation_matrix(data)?;
    extract_from_correlation(&corr, k)
}

/// Same as [`extract_factors`] for an already computed correlation matrix.
pub fn extract_from_correlation(corr: &DMatrix<f64>, k: usize) -> Result<LoadingMatrix> {
    let p = corr.nrows();
    if k == 0 || k > p {
        return Err(HillError::TooManyFactors {
            requested: k,
            available: p,
        });
    }
    let eig = jacobi_eigen(corr, linalg::EIGEN_TOLERANCE, linalg::EIGEN_MAX_SWEEPS)?;
    let mut loadings = DMatrix::<f64>::zeros(p, k);
    for j in 0..k {
        let scale = eig.values[j].max(0.0).sqrt();
        for i in 0..p {
            loadings[(i, j)] = eig.vectors[(i, j)] * scale;
        }
    }
    normalize_signs(&mut loadings, None);
    let top: f64 = eig.values.iter().take(k).sum();
    Ok(LoadingMatrix {
        loadings,
        explained_variance_fraction: top / p as f64,
        eigenvalues: eig.values,
    })
}

/// Flips columns so each column's largest-magnitude entry is positive.
/// When `rotation` is given the same flips are applied to its columns.
fn normalize_signs(loadings: &mut DMatrix<f64>, mut rotation: Option<&mut DMatrix<f64>>) {
    for j in 0..loadings.ncols() {
        let mut best = 0.0_f64;
        for i in 0..loadings.nrows() {
            let v = loadings[(i, j)];
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            loadings.column_mut(j).neg_mut();
            if let Some(t) = rotation.as_deref_mut() {
                t.column_mut(j).neg_mut();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    /// `loadings × rotation`.
    pub loadings: DMatrix<f64>,
    /// Orthogonal `k × k` matrix.
    pub rotation: DMatrix<f64>,
    pub criterion: f64,
    pub sweeps: usize,
}

/// Raw varimax criterion: summed per-column variance of squared loadings.
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let p = loadings.nrows() as f64;
    (0..loadings.ncols())
        .map(|j| {
            let sq: Vec<f64> = loadings.column(j).iter().map(|v| v * v).collect();
            let m = sq.iter().sum::<f64>() / p;
            sq.iter().map(|s| s * s).sum::<f64>() / p - m * m
        })
        .sum()
}

/// Varimax rotation by successive planar rotations of column pairs (no
/// Kaiser row normalization). Each planar step is the exact maximizer for
/// its pair, so the criterion never decreases between sweeps.
pub fn varimax_rotate(loadings: &DMatrix<f64>) -> Result<Rotation> {
    varimax_with(loadings, VARIMAX_MAX_SWEEPS, VARIMAX_TOLERANCE)
}

pub fn varimax_with(loadings: &DMatrix<f64>, max_sweeps: usize, tolerance: f64) -> Result<Rotation> {
    linalg::ensure_finite(loadings)?;
    let (p, k) = loadings.shape();
    let mut l = loadings.clone();
    let mut t = DMatrix::<f64>::identity(k, k);
    let mut criterion = varimax_criterion(&l);
    let mut sweeps = 0;

    if k >= 2 && p > 0 {
        loop {
            if sweeps == max_sweeps {
                return Err(HillError::NonConvergence {
                    what: "varimax rotation",
                    iterations: max_sweeps,
                });
            }
            sweeps += 1;
            for a in 0..k {
                for b in (a + 1)..k {
                    let phi = pair_angle(&l, a, b);
                    if phi != 0.0 {
                        let (s, c) = phi.sin_cos();
                        rotate_columns(&mut l, a, b, c, s);
                        rotate_columns(&mut t, a, b, c, s);
                    }
                }
            }
            let next = varimax_criterion(&l);
            let change = next - criterion;
            criterion = next;
            if change.abs() < tolerance {
                break;
            }
        }
    }

    normalize_signs(&mut l, Some(&mut t));
    Ok(Rotation {
        loadings: l,
        rotation: t,
        criterion,
        sweeps,
    })
}

fn pair_angle(l: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let p = l.nrows() as f64;
    let (mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..l.nrows() {
        let x = l[(i, a)];
        let y = l[(i, b)];
        let u = x * x - y * y;
        let v = 2.0 * x * y;
        sa += u;
        sb += v;
        sc += u * u - v * v;
        sd += 2.0 * u * v;
    }
    let num = sd - 2.0 * sa * sb / p;
    let den = sc - (sa * sa - sb * sb) / p;
    0.25 * num.atan2(den)
}

fn rotate_columns(m: &mut DMatrix<f64>, a: usize, b: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let x = m[(i, a)];
        let y = m[(i, b)];
        m[(i, a)] = c * x + s * y;
        m[(i, b)] = -s * x + c * y;
    }
}

/// Per-row sum of squared loadings.
pub fn communalities(loadings: &DMatrix<f64>) -> Vec<f64> {
    (0..loadings.nrows())
        .map(|i| loadings.row(i).iter().map(|v| v * v).sum())
        .collect()
}

/// Column index of each row's largest-magnitude loading (first on ties).
pub fn home_factors(loadings: &DMatrix<f64>) -> Vec<usize> {
    (0..loadings.nrows())
        .map(|i| {
            let mut best = 0;
            for j in 1..loadings.ncols() {
                if loadings[(i, j)].abs() > loadings[(i, best)].abs() {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Matches factors to dimensions: maximizes the number of items whose home
/// factor is their dimension's factor, ties broken by larger summed
/// |loading| of each dimension's items on its factor. `groups[i]` is the
/// dimension index of row `i`. Returns `factor_for_group`.
pub fn match_factors(loadings: &DMatrix<f64>, groups: &[usize], n_groups: usize) -> Vec<usize> {
    let k = loadings.ncols();
    let homes = home_factors(loadings);
    let mut count = vec![vec![0usize; k]; n_groups];
    let mut mass = vec![vec![0.0f64; k]; n_groups];
    for (i, &g) in groups.iter().enumerate() {
        count[g][homes[i]] += 1;
        for f in 0..k {
            mass[g][f] += loadings[(i, f)].abs();
        }
    }

    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(n_groups);
    let mut used = vec![false; k];
    search_assignments(&count, &mass, &mut current, &mut used, &mut best);
    best.map(|(_, _, a)| a).unwrap_or_default()
}

fn search_assignments(
    count: &[Vec<usize>],
    mass: &[Vec<f64>],
    current: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut Option<(usize, f64, Vec<usize>)>,
) {
    let g = current.len();
    if g == count.len() {
        let c: usize = current.iter().enumerate().map(|(g, &f)| count[g][f]).sum();
        let m: f64 = current.iter().enumerate().map(|(g, &f)| mass[g][f]).sum();
        let better = match best {
            None => true,
            Some((bc, bm, _)) => c > *bc || (c == *bc && m > *bm),
        };
        if better {
            *best = Some((c, m, current.clone()));
        }
        return;
    }
    for f in 0..used.len() {
        if !used[f] {
            used[f] = true;
            current.push(f);
            search_assignments(count, mass, current, used, best);
            current.pop();
            used[f] = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionAlpha {
    pub dimension: Dimension,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub n: usize,
    pub alpha_per_dimension: Vec<DimensionAlpha>,
    pub simple_structure_ok: bool,
    pub convergent_ok: bool,
    pub discriminant_ok: bool,
    pub misassigned_items: Vec<String>,
    pub explained_variance_fraction: f64,
    pub eigenvalues: Vec<f64>,
    /// Factor column matched to each dimension, in instrument order.
    pub factor_for_dimension: Vec<usize>,
    /// Rotated `12 × 4` loadings, rows in instrument item order.
    pub rotated_loadings: Vec<Vec<f64>>,
}

/// Minimum respondents for a validation run.
pub const MIN_VALIDATION_ROWS: usize = 13;

/// Checks reliability and simple structure of `data` (`n × 12`, columns in
/// instrument item order).
pub fn validate_instrument(data: &DMatrix<f64>, instrument: &Instrument) -> Result<ValidityReport> {
    let p = instrument.item_count();
    if data.ncols() != p {
        return Err(HillError::Malformed(format!(
            "expected {p} item columns, got {}",
            data.ncols()
        )));
    }
    if data.nrows() < MIN_VALIDATION_ROWS {
        return Err(HillError::TooFewRows {
            needed: MIN_VALIDATION_ROWS,
            got: data.nrows(),
        });
    }
    let extracted = extract_factors(data, DEFAULT_FACTORS)?;
    let rotated = varimax_rotate(&extracted.loadings)?;
    let l = &rotated.loadings;

    let groups: Vec<usize> = (0..p).map(|i| instrument.dimension_at(i).index()).collect();
    let factor_for = match_factors(l, &groups, Dimension::ALL.len());
    let homes = home_factors(l);
    let item_names: Vec<&str> = instrument.items().collect();

    let mut misassigned = Vec::new();
    let mut discriminant_ok = true;
    for i in 0..p {
        let own = factor_for[groups[i]];
        if homes[i] != own {
            misassigned.push(item_names[i].to_string());
        }
        let own_loading = l[(i, own)].abs();
        for (g, &f) in factor_for.iter().enumerate() {
            if g != groups[i] && l[(i, f)].abs() > own_loading {
                discriminant_ok = false;
            }
        }
    }
    let convergent_ok = misassigned.is_empty();

    let mut alphas = Vec::with_capacity(Dimension::ALL.len());
    for d in Dimension::ALL {
        let start = d.index() * ITEMS_PER_DIMENSION;
        let block = data.columns(start, ITEMS_PER_DIMENSION).into_owned();
        alphas.push(DimensionAlpha {
            dimension: d,
            alpha: cronbach_alpha(&block)?,
        });
    }

    Ok(ValidityReport {
        n: data.nrows(),
        alpha_per_dimension: alphas,
        simple_structure_ok: convergent_ok && discriminant_ok,
        convergent_ok,
        discriminant_ok,
        misassigned_items: misassigned,
        explained_variance_fraction: extracted.explained_variance_fraction,
        eigenvalues: extracted.eigenvalues.iter().copied().collect(),
        factor_for_dimension: factor_for,
        rotated_loadings: matrix_to_rows(l),
    })
}
