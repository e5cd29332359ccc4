//! Dense matrix kernels shared by every solver.
//!
//! Matrices are plain [`nalgebra::DMatrix<f64>`] values with rows as
//! samples. Factorizations are delegated to nalgebra; this module adds the
//! norms, the ordering and sign conventions for eigenpairs, and the error
//! reporting the rest of the crate relies on.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Numerical tolerances used across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed `|a_ij - a_ji|` for inputs that must be symmetric.
    pub symmetry: f64,
    /// Slack used when checking that a similarity matrix is symmetric.
    pub similarity_symmetry: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symmetry: 1e-8,
            similarity_symmetry: 1e-12,
        }
    }
}

/// Eigenpairs sorted by ascending eigenvalue; column `i` of `vectors`
/// belongs to `values[i]`.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: DVector<f64>,
    pub vectors: DenseMatrix,
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean norm of every row.
pub fn row_norms(a: &DenseMatrix) -> Vec<f64> {
    a.row_iter().map(|row| row.norm()).collect()
}

/// Sum of the row-wise Euclidean norms.
pub fn l21_norm(a: &DenseMatrix) -> f64 {
    row_norms(a).into_iter().sum()
}

pub fn max_asymmetry(a: &DenseMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn ensure_square(a: &DenseMatrix, context: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::dims(
            context,
            "a square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_finite(a: &DenseMatrix, context: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

pub(crate) fn ensure_symmetric(a: &DenseMatrix, tol: f64) -> Result<()> {
    let max_asymmetry = max_asymmetry(a);
    if max_asymmetry > tol {
        return Err(Error::NotSymmetric { max_asymmetry });
    }
    Ok(())
}

/// The `c` smallest eigenpairs of a symmetric matrix.
///
/// Eigenvectors are unit length and carry a fixed sign: the entry of
/// largest magnitude (lowest index among near-ties) is positive, so the
/// same input always yields the same embedding.
pub fn sym_eigen_smallest(a: &DenseMatrix, c: usize) -> Result<EigenResult> {
    sym_eigen_smallest_with(a, c, &Tolerances::default())
}

pub fn sym_eigen_smallest_with(
    a: &DenseMatrix,
    c: usize,
    tol: &Tolerances,
) -> Result<EigenResult> {
    ensure_square(a, "sym_eigen_smallest")?;
    ensure_finite(a, "sym_eigen_smallest input")?;
    let n = a.nrows();
    if c == 0 || c > n {
        return Err(Error::range("c", c, format!("[1, {n}]")));
    }
    ensure_symmetric(a, tol.symmetry)?;

    // Average with the transpose so round-off asymmetry does not leak into
    // the decomposition.
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));

    let mut values = DVector::zeros(c);
    let mut vectors = DenseMatrix::zeros(n, c);
    for (out, &src) in order.iter().take(c).enumerate() {
        values[out] = eig.eigenvalues[src];
        let mut v = eig.eigenvectors.column(src).into_owned();
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        fix_sign(&mut v);
        vectors.set_column(out, &v);
    }
    Ok(EigenResult { values, vectors })
}

fn fix_sign(v: &mut DVector<f64>) {
    let max_abs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max_abs == 0.0 {
        return;
    }
    let cutoff = max_abs * (1.0 - 1e-9);
    if let Some(pivot) = v.iter().position(|x| x.abs() >= cutoff) {
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
    }
}

/// Solves `A X = B` for symmetric positive definite `A` via Cholesky.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_square(a, "solve_spd")?;
    if a.ncols() != b.nrows() {
        return Err(Error::dims(
            "solve_spd right-hand side",
            format!("{} rows", a.ncols()),
            format!("{} rows", b.nrows()),
        ));
    }
    ensure_finite(a, "solve_spd matrix")?;
    ensure_finite(b, "solve_spd right-hand side")?;
    let chol = a
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { context: "Cholesky factorization failed" })?;
    // Pivots of a numerically rank-deficient matrix collapse to round-off.
    let pivots = chol.l_dirty().diagonal();
    let largest = pivots.iter().fold(0.0f64, |m, v| m.max(v * v));
    let smallest = pivots.iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if smallest <= a.nrows() as f64 * f64::EPSILON * largest {
        return Err(Error::NotPositiveDefinite { context: "numerically singular" });
    }
    let x = chol.solve(b);
    ensure_finite(&x, "solve_spd solution")?;
    Ok(x)
}

/// Centers every column and scales it to unit population standard
/// deviation. Constant columns become all zeros.
pub fn standardize_columns(x: &DenseMatrix) -> DenseMatrix {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        // Relative threshold: a constant column can leave round-off residue
        // after centering.
        let scale = mean.abs().max(1.0);
        if sd <= 1e-12 * scale {
            col.fill(0.0);
        } else {
            col /= sd;
        }
    }
    out
}
