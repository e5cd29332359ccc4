//! Pseudo-label learning and feature weighting on a combined Laplacian.
//!
//! The solver minimizes
//!
//! ```text
//! Tr[F'(L1 + lambda L0)F] + alpha (||XW - F||_F^2 + beta ||W||_{2,1})
//!     + gamma/2 ||F'F - I||_F^2,      F >= 0
//! ```
//!
//! by alternating a multiplicative update of the nonnegative pseudo labels
//! `F` with a reweighted ridge solve for the coefficients `W`. Each outer
//! iteration is
//!
//! 1. `M = alpha [I - X (X'X + beta D)^{-1} X']`
//! 2. `F <- F * [(gamma F) / ((L1 + lambda L0) F + M F + gamma F F' F)]^e`
//! 3. `W = (X'X + beta D)^{-1} X' F`
//! 4. `D_ii = 1 / (2 ||w_i||)`
//!
//! The exponent `e` is `1/2` by default ([`FUpdateRule::SquareRoot`]). With
//! `e = 1` ([`FUpdateRule::Ratio`]) and a large `gamma` the update reduces
//! to `F <- F * F / (F F' F)`, which maps a column scale `s` to `1/s` and
//! cycles instead of descending unless `F` starts orthonormal.
//!
//! When `d > n` the `d x d` systems are replaced by their `n x n`
//! push-through equivalents,
//! `(X'X + beta D)^{-1} X' = D^{-1} X' (X D^{-1} X' + beta I)^{-1}`,
//! which also gives `M = alpha beta (X D^{-1} X' + beta I)^{-1}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::numcore::{frobenius_norm, l21_norm, row_norms, solve_spd, sym_eigen_smallest, DenseMatrix};

/// Exponent applied to the multiplicative ratio in the pseudo-label update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FUpdateRule {
    /// `F * ratio`.
    Ratio,
    /// `F * sqrt(ratio)`.
    #[default]
    SquareRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GolfsConfig {
    /// Weight of the local Laplacian relative to the global one.
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Penalty on `||F'F - I||`, standing in for the orthogonality constraint.
    pub gamma: f64,
    pub clusters: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub eps_div: f64,
    pub eps_w: f64,
    pub f_update: FUpdateRule,
    /// Relative slack allowed when checking that the objective decreases.
    pub descent_slack: f64,
    /// Fail with [`Error::NonMonotone`] instead of only recording the step.
    pub strict_descent: bool,
}

impl Default for GolfsConfig {
    fn default() -> Self {
        GolfsConfig {
            lambda: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1e8,
            clusters: 5,
            tol: 1e-6,
            max_iter: 100,
            eps_div: 1e-10,
            eps_w: 1e-8,
            f_update: FUpdateRule::SquareRoot,
            descent_slack: 1e-6,
            strict_descent: false,
        }
    }
}

impl GolfsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::range("lambda", self.lambda, "[0, inf)"));
        }
        for (what, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("tol", self.tol),
            ("eps_div", self.eps_div),
            ("eps_w", self.eps_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::range(what, v, "(0, inf)"));
            }
        }
        if self.clusters < 2 {
            return Err(Error::range("clusters", self.clusters, "[2, inf)"));
        }
        if self.max_iter == 0 {
            return Err(Error::range("max_iter", self.max_iter, "[1, inf)"));
        }
        Ok(())
    }
}

/// One step where the objective rose by more than the allowed slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentViolation {
    pub iteration: usize,
    /// `true` for the F-update with `W` held fixed, `false` for the full
    /// iteration.
    pub half_step: bool,
    pub previous: f64,
    pub current: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    /// Nonnegative pseudo labels, `n x c`.
    pub f: DenseMatrix,
    /// Coefficients, `d x c`.
    pub w: DenseMatrix,
    /// Diagonal of the reweighting matrix, one entry per feature.
    pub d: DVector<f64>,
    /// Objective at `(F^t, W^t)` for `t = 0, 1, ...`.
    pub objective_trace: Vec<f64>,
    /// Objective at `(F^{t+1}, W^t)`, one entry per iteration.
    pub half_step_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub violations: Vec<DescentViolation>,
}

fn check_dims(x: &DenseMatrix, f: &DenseMatrix, l0: &LaplacianMatrix, l1: &LaplacianMatrix) -> Result<()> {
    let n = x.nrows();
    if f.nrows() != n {
        return Err(Error::dims("pseudo labels", format!("{n} rows"), format!("{} rows", f.nrows())));
    }
    if l0.size() != n || l1.size() != n {
        return Err(Error::dims(
            "Laplacians",
            format!("{n}x{n}"),
            format!("{} and {}", l0.size(), l1.size()),
        ));
    }
    Ok(())
}

/// Value of the penalized objective at `(F, W)`.
pub fn transformed_objective(
    x: &DenseMatrix,
    f: &DenseMatrix,
    w: &DenseMatrix,
    l0: &LaplacianMatrix,
    l1: &LaplacianMatrix,
    config: &GolfsConfig,
) -> Result<f64> {
    check_dims(x, f, l0, l1)?;
    if w.nrows() != x.ncols() || w.ncols() != f.ncols() {
        return Err(Error::dims(
            "coefficients",
            format!("{}x{}", x.ncols(), f.ncols()),
            format!("{}x{}", w.nrows(), w.ncols()),
        ));
    }
    let graph = (f.transpose() * (l1.matrix() * f)).trace()
        + config.lambda * (f.transpose() * (l0.matrix() * f)).trace();
    let fit = frobenius_norm(&(x * w - f)).powi(2);
    let c = f.ncols();
    let ortho = frobenius_norm(&(f.transpose() * f - DenseMatrix::identity(c, c))).powi(2);
    Ok(graph + config.alpha * (fit + config.beta * l21_norm(w)) + 0.5 * config.gamma * ortho)
}

fn check_reweighting(x: &DenseMatrix, d: &DVector<f64>, beta: f64) -> Result<()> {
    if d.len() != x.ncols() {
        return Err(Error::dims("reweighting diagonal", x.ncols(), d.len()));
    }
    if !(beta > 0.0) {
        return Err(Error::range("beta", beta, "(0, inf)"));
    }
    if let Some(v) = d.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::range("D_ii", v, "(0, inf)"));
    }
    Ok(())
}

/// `X D^{-1} X' + beta I`, the `n x n` system used when `d > n`.
fn pushed_system(x: &DenseMatrix, d: &DVector<f64>, beta: f64) -> DenseMatrix {
    let mut scaled = x.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= d[j];
    }
    let mut k = &scaled * x.transpose();
    k = (&k + k.transpose()) * 0.5;
    for i in 0..k.nrows() {
        k[(i, i)] += beta;
    }
    k
}

/// `X'X + beta D`, the `d x d` system.
fn feature_system(x: &DenseMatrix, d: &DVector<f64>, beta: f64) -> DenseMatrix {
    let mut g = x.transpose() * x;
    g = (&g + g.transpose()) * 0.5;
    for j in 0..g.nrows() {
        g[(j, j)] += beta * d[j];
    }
    g
}

/// `W = (X'X + beta D)^{-1} X'F`, the minimizer of
/// `||XW - F||^2 + beta Tr(W'DW)`.
pub fn update_w(x: &DenseMatrix, f: &DenseMatrix, d: &DVector<f64>, beta: f64) -> Result<DenseMatrix> {
    check_reweighting(x, d, beta)?;
    if f.nrows() != x.nrows() {
        return Err(Error::dims("pseudo labels", x.nrows(), f.nrows()));
    }
    if x.ncols() > x.nrows() {
        update_w_pushed(x, f, d, beta)
    } else {
        update_w_direct(x, f, d, beta)
    }
}

pub(crate) fn update_w_direct(
    x: &DenseMatrix,
    f: &DenseMatrix,
    d: &DVector<f64>,
    beta: f64,
) -> Result<DenseMatrix> {
    solve_spd(&feature_system(x, d, beta), &(x.transpose() * f))
}

pub(crate) fn update_w_pushed(
    x: &DenseMatrix,
    f: &DenseMatrix,
    d: &DVector<f64>,
    beta: f64,
) -> Result<DenseMatrix> {
    let z = solve_spd(&pushed_system(x, d, beta), f)?;
    let mut w = x.transpose() * z;
    for (j, mut row) in w.row_iter_mut().enumerate() {
        row /= d[j];
    }
    Ok(w)
}

/// `D_ii = 1 / (2 max(||w_i||, eps_w))`.
pub fn update_d(w: &DenseMatrix, eps_w: f64) -> DVector<f64> {
    DVector::from_iterator(
        w.nrows(),
        row_norms(w).into_iter().map(|norm| 1.0 / (2.0 * norm.max(eps_w))),
    )
}

/// `M = alpha [I - X (X'X + beta D)^{-1} X']`.
pub fn m_matrix(x: &DenseMatrix, d: &DVector<f64>, alpha: f64, beta: f64) -> Result<DenseMatrix> {
    check_reweighting(x, d, beta)?;
    let n = x.nrows();
    let m = if x.ncols() > n {
        let inv = solve_spd(&pushed_system(x, d, beta), &DenseMatrix::identity(n, n))?;
        inv * (alpha * beta)
    } else {
        let hat = x * solve_spd(&feature_system(x, d, beta), &x.transpose())?;
        (DenseMatrix::identity(n, n) - hat) * alpha
    };
    Ok((&m + m.transpose()) * 0.5)
}

/// Multiplicative pseudo-label update
/// `F_ij <- F_ij (gamma F)_ij / (L1 F + lambda L0 F + M F + gamma F F' F)_ij`.
/// Entries that are zero stay zero and the denominator is bounded below by
/// `eps_div`.
pub fn update_f(
    f: &DenseMatrix,
    l0: &LaplacianMatrix,
    l1: &LaplacianMatrix,
    m: &DenseMatrix,
    lambda: f64,
    gamma: f64,
    eps_div: f64,
) -> DenseMatrix {
    update_f_with(f, l0, l1, m, lambda, gamma, eps_div, FUpdateRule::Ratio)
}

/// [`update_f`] with a choice of exponent on the ratio.
#[allow(clippy::too_many_arguments)]
pub fn update_f_with(
    f: &DenseMatrix,
    l0: &LaplacianMatrix,
    l1: &LaplacianMatrix,
    m: &DenseMatrix,
    lambda: f64,
    gamma: f64,
    eps_div: f64,
    rule: FUpdateRule,
) -> DenseMatrix {
    let ff = f.transpose() * f;
    let denom = l1.matrix() * f + l0.matrix() * f * lambda + m * f + f * ff * gamma;
    DenseMatrix::from_fn(f.nrows(), f.ncols(), |i, j| {
        let v = f[(i, j)];
        let ratio = (gamma * v) / denom[(i, j)].max(eps_div);
        match rule {
            FUpdateRule::Ratio => v * ratio,
            FUpdateRule::SquareRoot => v * ratio.sqrt(),
        }
    })
}

/// Positive starting point for the pseudo labels: the `c` smallest
/// eigenvectors of `L1 + lambda L0`, in absolute value, shifted by `1e-3`
/// and scaled to unit columns.
pub fn initial_pseudo_labels(
    l0: &LaplacianMatrix,
    l1: &LaplacianMatrix,
    lambda: f64,
    clusters: usize,
) -> Result<DenseMatrix> {
    let combined = l1.combine(lambda, l0)?;
    let eig = sym_eigen_smallest(combined.matrix(), clusters)?;
    let mut f = eig.vectors.abs();
    f.add_scalar_mut(1e-3);
    for mut col in f.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Ok(f)
}

/// Alternating minimization from `f_init`.
pub fn golfs_fit(
    x: &DenseMatrix,
    l0: &LaplacianMatrix,
    l1: &LaplacianMatrix,
    config: &GolfsConfig,
    f_init: &DenseMatrix,
) -> Result<SolverState> {
    config.validate()?;
    check_dims(x, f_init, l0, l1)?;
    if f_init.ncols() != config.clusters {
        return Err(Error::dims("initial pseudo labels", config.clusters, f_init.ncols()));
    }
    if f_init.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::range("initial pseudo label entry", "non-positive", "(0, inf)"));
    }

    let mut f = f_init.clone();
    let mut d = DVector::from_element(x.ncols(), 1.0);
    let mut w = update_w(x, &f, &d, config.beta)?;
    d = update_d(&w, config.eps_w);

    let mut trace = vec![transformed_objective(x, &f, &w, l0, l1, config)?];
    let mut half_trace = Vec::new();
    let mut violations = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let slack = |prev: f64| config.descent_slack * prev.abs().max(1.0);

    while iterations < config.max_iter {
        let previous = *trace.last().expect("trace starts non-empty");
        let m = m_matrix(x, &d, config.alpha, config.beta)?;
        f = update_f_with(&f, l0, l1, &m, config.lambda, config.gamma, config.eps_div, config.f_update);
        let half = transformed_objective(x, &f, &w, l0, l1, config)?;
        w = update_w(x, &f, &d, config.beta)?;
        d = update_d(&w, config.eps_w);
        let value = transformed_objective(x, &f, &w, l0, l1, config)?;
        iterations += 1;
        half_trace.push(half);
        trace.push(value);

        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "pseudo labels" });
        }
        for (is_half, prev, cur) in [(true, previous, half), (false, half, value)] {
            if cur - prev > slack(prev) {
                let violation = DescentViolation {
                    iteration: iterations,
                    half_step: is_half,
                    previous: prev,
                    current: cur,
                };
                if config.strict_descent {
                    return Err(Error::NonMonotone {
                        stage: if is_half { "pseudo-label update" } else { "coefficient update" },
                        iteration: iterations,
                        previous: prev,
                        current: cur,
                    });
                }
                log::debug!("descent violation {violation:?}");
                violations.push(violation);
            }
        }

        if (previous - value).abs() <= config.tol * previous.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(SolverState {
        f,
        w,
        d,
        objective_trace: trace,
        half_step_trace: half_trace,
        iterations,
        converged,
        violations,
    })
}

/// Features ordered by decreasing coefficient row norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// Zero-based feature indices, best first.
    pub order: Vec<usize>,
    /// Score of every feature, indexed by feature (not by rank).
    pub scores: Vec<f64>,
}

impl FeatureRanking {
    /// Sorts by descending score with ties broken by ascending index.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        FeatureRanking { order, scores }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The first `s` features of the ranking.
    pub fn top(&self, s: usize) -> &[usize] {
        &self.order[..s.min(self.order.len())]
    }
}

pub fn rank_features(w: &DenseMatrix) -> FeatureRanking {
    FeatureRanking::from_scores(row_norms(w))
}
