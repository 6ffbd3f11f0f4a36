//! Dense symmetric eigen-decomposition (cyclic Jacobi) and the sample
//! statistics the factor analysis is built on.

use nalgebra::{DMatrix, DVector};

use crate::error::{HillError, Result};

pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const EIGEN_MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors
/// as unit-norm columns in matching order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigen-solver. Fails with `NonConvergence` if the
/// off-diagonal mass does not vanish within `max_sweeps` or the final
/// residual `max ‖A·v − λ·v‖` exceeds `tolerance`.
pub fn jacobi_eigen(a: &DMatrix<f64>, tolerance: f64, max_sweeps: usize) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(HillError::Malformed(format!(
            "eigen-solve needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            if !a[(i, j)].is_finite() {
                return Err(HillError::NonFinite { row: i, col: j });
            }
        }
    }

    let mut m = a.clone();
    // Work on the exactly symmetric part.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m);
        if off <= 1e-14 * scale {
            break;
        }
        if sweeps == max_sweeps {
            return Err(HillError::NonConvergence {
                what: "jacobi eigen-solver",
                iterations: max_sweeps,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Below resolution of the diagonal: drop it.
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }

    let residual = eigen_residual(a, &values, &vectors);
    if residual > tolerance {
        return Err(HillError::NonConvergence {
            what: "jacobi eigen-solver (residual)",
            iterations: sweeps,
        });
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = m.nrows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                sum += m[(i, j)] * m[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Largest column residual `‖A·vᵢ − λᵢ·vᵢ‖`.
pub fn eigen_residual(a: &DMatrix<f64>, values: &DVector<f64>, vectors: &DMatrix<f64>) -> f64 {
    (0..values.len())
        .map(|i| {
            let col = vectors.column(i);
            (a * col - col * values[i]).norm()
        })
        .fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n − 1` denominator. Zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Checks that every entry of `data` is finite.
pub fn ensure_finite(data: &DMatrix<f64>) -> Result<()> {
    for i in 0..data.nrows() {
        for j in 0..data.ncols() {
            if !data[(i, j)].is_finite() {
                return Err(HillError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Pearson correlation matrix of the columns of `data` (rows are
/// observations). Constant columns are rejected.
pub fn correlation_matrix(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(data)?;
    let (n, p) = data.shape();
    if n < 2 {
        return Err(HillError::TooFewRows { needed: 2, got: n });
    }
    let mut centered = data.clone();
    let mut sds = Vec::with_capacity(p);
    for j in 0..p {
        let col: Vec<f64> = data.column(j).iter().copied().collect();
        let m = mean(&col);
        let mut ss = 0.0;
        for i in 0..n {
            let d = data[(i, j)] - m;
            centered[(i, j)] = d;
            ss += d * d;
        }
        if ss == 0.0 {
            return Err(HillError::ConstantColumn(j));
        }
        sds.push(ss.sqrt());
    }
    let mut corr = DMatrix::<f64>::identity(p, p);
    for a in 0..p {
        for b in (a + 1)..p {
            let cross = centered.column(a).dot(&centered.column(b));
            let r = (cross / (sds[a] * sds[b])).clamp(-1.0, 1.0);
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }
    Ok(corr)
}

/// Row-major nested vectors into a matrix; rejects ragged input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(HillError::RaggedMatrix {
                row: i,
                expected: ncols,
                got: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
