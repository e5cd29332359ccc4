//! Sample-space regularized self-representation.
//!
//! Solves `min_P ||X' - X'P||_{2,1} + kappa ||P||_{2,1}` by iteratively
//! reweighted least squares, then turns the coefficient magnitudes into the
//! global similarity graph.
//!
//! With `G1 = diag(g1)` (one weight per feature) and `G2 = diag(g2)` (one
//! weight per row of `P`), each step solves the symmetric positive definite
//! system
//!
//! ```text
//! (X G1 X' + kappa G2) P = X G1 X'
//! ```
//!
//! which is the row-scaled system `(G2^{-1} X G1 X' + kappa I) P =
//! G2^{-1} X G1 X'` multiplied through by `G2`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimilarityMatrix;
use crate::numcore::{l21_norm, row_norms, solve_spd, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfRepConfig {
    pub kappa: f64,
    /// Relative objective change that ends the iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound applied to `2 * norm` before taking reciprocals.
    pub floor: f64,
}

impl Default for SelfRepConfig {
    fn default() -> Self {
        SelfRepConfig {
            kappa: 1.0,
            tol: 1e-6,
            max_iter: 50,
            floor: 1e-8,
        }
    }
}

impl SelfRepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::range("kappa", self.kappa, "[0, inf)"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::range("tol", self.tol, "(0, inf)"));
        }
        if self.max_iter == 0 {
            return Err(Error::range("max_iter", self.max_iter, "[1, inf)"));
        }
        if !(self.floor > 0.0) {
            return Err(Error::range("floor", self.floor, "(0, inf)"));
        }
        Ok(())
    }
}

/// Reweighting diagonals for one IRLS step.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlsWeights {
    /// `g1_j = 1 / max(2 ||x_j' - x_j' P||, floor)`, one per feature.
    pub feature: DVector<f64>,
    /// `g2_i = 1 / max(2 ||p_i||, floor)`, one per row of `P`.
    pub sample: DVector<f64>,
    pub floor: f64,
}

impl IrlsWeights {
    pub fn from_iterate(x: &DenseMatrix, p: &DenseMatrix, floor: f64) -> Result<Self> {
        check_shapes(x, p)?;
        let residual = residual(x, p);
        let weight = |norm: f64| 1.0 / (2.0 * norm).max(floor);
        Ok(IrlsWeights {
            feature: DVector::from_iterator(
                residual.nrows(),
                row_norms(&residual).into_iter().map(weight),
            ),
            sample: DVector::from_iterator(p.nrows(), row_norms(p).into_iter().map(weight)),
            floor,
        })
    }
}

fn check_shapes(x: &DenseMatrix, p: &DenseMatrix) -> Result<()> {
    let n = x.nrows();
    if p.nrows() != n || p.ncols() != n {
        return Err(Error::dims(
            "self-representation coefficients",
            format!("{n}x{n}"),
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }
    Ok(())
}

/// `X' - X'P`, one row per feature.
fn residual(x: &DenseMatrix, p: &DenseMatrix) -> DenseMatrix {
    let xt = x.transpose();
    &xt - &xt * p
}

/// `||X' - X'P||_{2,1} + kappa ||P||_{2,1}`.
pub fn rsr_objective(x: &DenseMatrix, p: &DenseMatrix, kappa: f64) -> Result<f64> {
    check_shapes(x, p)?;
    Ok(l21_norm(&residual(x, p)) + kappa * l21_norm(p))
}

/// `X G1 X'`.
fn weighted_gram(x: &DenseMatrix, feature_weights: &DVector<f64>) -> DenseMatrix {
    let mut scaled = x.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= feature_weights[j];
    }
    let gram = &scaled * x.transpose();
    (&gram + gram.transpose()) * 0.5
}

/// One reweighted least-squares solve with the weights held fixed.
pub fn irls_update(x: &DenseMatrix, weights: &IrlsWeights, kappa: f64) -> Result<DenseMatrix> {
    let n = x.nrows();
    if weights.feature.len() != x.ncols() || weights.sample.len() != n {
        return Err(Error::dims(
            "IRLS weights",
            format!("{} feature and {n} sample weights", x.ncols()),
            format!("{} and {}", weights.feature.len(), weights.sample.len()),
        ));
    }
    let rhs = weighted_gram(x, &weights.feature);
    let mut system = rhs.clone();
    for i in 0..n {
        system[(i, i)] += kappa * weights.sample[i];
    }
    solve_spd(&system, &rhs).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::Singular {
            hint: "X G1 X' + kappa G2 is not positive definite; use kappa > 0",
        },
        other => other,
    })
}

/// The same update computed from the row-scaled, nonsymmetric form
/// `(G2^{-1} X G1 X' + kappa I)^{-1} G2^{-1} X G1 X'` with an LU solve.
///
/// Kept as an independent route for cross-checking [`irls_update`].
pub fn irls_update_row_scaled(
    x: &DenseMatrix,
    weights: &IrlsWeights,
    kappa: f64,
) -> Result<DenseMatrix> {
    let n = x.nrows();
    let mut scaled = weighted_gram(x, &weights.feature);
    for i in 0..n {
        let inv = 1.0 / weights.sample[i];
        scaled.row_mut(i).scale_mut(inv);
    }
    let mut system = scaled.clone();
    for i in 0..n {
        system[(i, i)] += kappa;
    }
    system
        .lu()
        .solve(&scaled)
        .ok_or(Error::Singular { hint: "row-scaled IRLS system is singular" })
}

/// Recomputes the weights from `p` and performs one update.
pub fn irls_step(x: &DenseMatrix, p: &DenseMatrix, config: &SelfRepConfig) -> Result<DenseMatrix> {
    let weights = IrlsWeights::from_iterate(x, p, config.floor)?;
    irls_update(x, &weights, config.kappa)
}

#[derive(Debug, Clone)]
pub struct SelfRepFit {
    pub coefficients: DenseMatrix,
    /// Objective at the zero start followed by the value after every step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SelfRepFit {
    /// Largest relative increase between consecutive steps, ignoring the
    /// move away from the zero start. Negative when the trace strictly
    /// decreases.
    pub fn max_relative_increase(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .skip(1)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs IRLS from `P = 0` until the relative objective change drops below
/// `tol` or `max_iter` steps have been taken.
pub fn solve_selfrep(x: &DenseMatrix, config: &SelfRepConfig) -> Result<SelfRepFit> {
    config.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::range("sample count", n, "[2, inf)"));
    }
    let mut p = DenseMatrix::zeros(n, n);
    let mut trace = vec![rsr_objective(x, &p, config.kappa)?];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        p = irls_step(x, &p, config)?;
        iterations += 1;
        let value = rsr_objective(x, &p, config.kappa)?;
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(value);
        if (previous - value).abs() <= config.tol * previous.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(SelfRepFit {
        coefficients: p,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// `S1 = (|P| + |P|') / 2` with the diagonal cleared.
pub fn global_similarity(p: &DenseMatrix) -> Result<SimilarityMatrix> {
    if p.nrows() != p.ncols() {
        return Err(Error::dims(
            "global_similarity",
            "a square matrix",
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }
    let abs = p.abs();
    let mut s = (&abs + abs.transpose()) * 0.5;
    s.fill_diagonal(0.0);
    SimilarityMatrix::new(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn sample_x() -> DenseMatrix {
        dmatrix![
            1.0, 0.5, -0.3;
            0.2, -1.0, 0.8;
            -0.7, 0.1, 0.4;
            0.3, 0.9, -1.2
        ]
    }

    #[test]
    fn objective_examples() {
        let x = sample_x();
        let eye = DenseMatrix::identity(4, 4);
        assert!(rsr_objective(&x, &eye, 0.0).unwrap().abs() < 1e-12);
        let zero = DenseMatrix::zeros(4, 4);
        let expected = l21_norm(&x.transpose());
        assert!((rsr_objective(&x, &zero, 0.0).unwrap() - expected).abs() < 1e-12);
        assert!((rsr_objective(&x, &eye, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!(rsr_objective(&x, &DenseMatrix::zeros(3, 3), 1.0).is_err());
    }

    #[test]
    fn global_similarity_examples() {
        let s = global_similarity(&dmatrix![0.0, -2.0; 4.0, 0.0]).unwrap();
        assert_eq!(s.matrix(), &dmatrix![0.0, 3.0; 3.0, 0.0]);

        let sym = dmatrix![5.0, 1.0, 2.0; 1.0, 5.0, 0.5; 2.0, 0.5, 5.0];
        let s = global_similarity(&sym).unwrap();
        assert_eq!(s.matrix(), &dmatrix![0.0, 1.0, 2.0; 1.0, 0.0, 0.5; 2.0, 0.5, 0.0]);

        let anti = dmatrix![0.0, 1.5; -1.5, 0.0];
        let s = global_similarity(&anti).unwrap();
        assert_eq!(s.matrix(), &dmatrix![0.0, 1.5; 1.5, 0.0]);
    }

    #[test]
    fn weights_are_floored() {
        let x = sample_x();
        let w = IrlsWeights::from_iterate(&x, &DenseMatrix::zeros(4, 4), 1e-8).unwrap();
        assert!(w.sample.iter().all(|&g| g == 1e8));
        assert!(w.feature.iter().all(|&g| g > 0.0 && g <= 1e8));
    }

    #[test]
    fn singular_system_is_reported() {
        // more samples than features: X X' is rank deficient
        let x = sample_x();
        let w = IrlsWeights {
            feature: DVector::from_element(3, 1.0),
            sample: DVector::from_element(4, 1.0),
            floor: 1e-8,
        };
        assert!(matches!(irls_update(&x, &w, 0.0), Err(Error::Singular { .. })));
    }
}
