//! Similarity graphs over samples and their unnormalized Laplacians.
//!
//! The local graph connects each sample to its `k` nearest neighbours with
//! Gaussian weights. [`cut_loss`] and [`scaled_indicator`] expose the ratio
//! cut and the matching indicator matrix so that the identity
//! `cut_loss(S, p) == Tr(F' L F)` can be checked directly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::labels::ClusterLabels;
use crate::numcore::{max_asymmetry, DenseMatrix, Tolerances};

/// Symmetric, nonnegative, zero-diagonal weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(DenseMatrix);

impl SimilarityMatrix {
    pub fn new(weights: DenseMatrix) -> Result<Self> {
        Self::with_tolerance(weights, Tolerances::default().similarity_symmetry)
    }

    pub fn with_tolerance(weights: DenseMatrix, symmetry_tol: f64) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(Error::InvalidSimilarity(format!(
                "shape {}x{} is not square",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if let Some(v) = weights.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidSimilarity(format!("entry {v} is negative or non-finite")));
        }
        if let Some(i) = (0..weights.nrows()).find(|&i| weights[(i, i)] != 0.0) {
            return Err(Error::InvalidSimilarity(format!("diagonal entry {i} is nonzero")));
        }
        let asym = max_asymmetry(&weights);
        if asym > symmetry_tol {
            return Err(Error::InvalidSimilarity(format!("asymmetry {asym:e}")));
        }
        Ok(SimilarityMatrix(weights))
    }

    pub fn zeros(n: usize) -> Self {
        SimilarityMatrix(DenseMatrix::zeros(n, n))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.0
    }
}

/// `L = D - S` for a similarity matrix `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DenseMatrix);

impl LaplacianMatrix {
    /// The Laplacian of the empty graph on `n` vertices.
    pub fn zeros(n: usize) -> Self {
        LaplacianMatrix(DenseMatrix::zeros(n, n))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    /// `self + weight * other`, which is again a Laplacian for `weight >= 0`.
    pub fn combine(&self, weight: f64, other: &LaplacianMatrix) -> Result<LaplacianMatrix> {
        if self.size() != other.size() {
            return Err(Error::dims("Laplacian combination", self.size(), other.size()));
        }
        if !(weight >= 0.0) {
            return Err(Error::range("Laplacian weight", weight, "[0, inf)"));
        }
        Ok(LaplacianMatrix(&self.0 + &other.0 * weight))
    }
}

/// Squared Euclidean distances between all pairs of rows. Each entry is
/// accumulated independently so the result does not depend on evaluation
/// order.
pub fn pairwise_sq_distances(x: &DenseMatrix) -> DenseMatrix {
    let n = x.nrows();
    let mut dist = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for c in 0..x.ncols() {
                let diff = x[(i, c)] - x[(j, c)];
                acc += diff * diff;
            }
            dist[(i, j)] = acc;
            dist[(j, i)] = acc;
        }
    }
    dist
}

/// Indices of the `k` nearest neighbours of every sample, excluding the
/// sample itself. Ties go to the smaller index.
pub fn knn_indices(sq_dist: &DenseMatrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = sq_dist.nrows();
    if k == 0 || k >= n {
        return Err(Error::range("k", k, format!("[1, {}]", n.saturating_sub(1))));
    }
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| sq_dist[(i, a)].total_cmp(&sq_dist[(i, b)]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect())
}

/// Median of the Euclidean distances from each sample to its `k` nearest
/// neighbours. Falls back to 1 when every such distance is zero.
pub fn median_knn_distance(sq_dist: &DenseMatrix, neighbours: &[Vec<usize>]) -> f64 {
    let mut d: Vec<f64> = neighbours
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&j| sq_dist[(i, j)].sqrt()))
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Gaussian-weighted kNN graph: samples `i` and `j` are joined when either
/// is among the other's `k` nearest neighbours, with weight
/// `exp(-||x_i - x_j||^2 / sigma^2)`.
///
/// `sigma = None` selects the median kNN distance.
pub fn knn_gaussian_similarity(
    x: &DenseMatrix,
    k: usize,
    sigma: Option<f64>,
) -> Result<SimilarityMatrix> {
    let n = x.nrows();
    if let Some(s) = sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::range("sigma", s, "(0, inf)"));
        }
    }
    let sq = pairwise_sq_distances(x);
    let neighbours = knn_indices(&sq, k)?;
    let sigma = sigma.unwrap_or_else(|| median_knn_distance(&sq, &neighbours));
    let denom = sigma * sigma;

    let mut s = DenseMatrix::zeros(n, n);
    for (i, nb) in neighbours.iter().enumerate() {
        for &j in nb {
            let w = (-sq[(i, j)] / denom).exp();
            s[(i, j)] = w;
            s[(j, i)] = w;
        }
    }
    Ok(SimilarityMatrix(s))
}

pub fn laplacian(s: &SimilarityMatrix) -> LaplacianMatrix {
    let w = s.matrix();
    let mut l = -w.clone();
    for i in 0..w.nrows() {
        l[(i, i)] = w.row(i).sum();
    }
    LaplacianMatrix(l)
}

/// Ratio-cut loss `1/2 * sum_j W(R_j, not R_j) / |R_j|`, where `W` sums
/// `S_ab` over ordered pairs with exactly one of `a`, `b` in `R_j`.
pub fn cut_loss(s: &SimilarityMatrix, partition: &ClusterLabels) -> Result<f64> {
    if partition.len() != s.size() {
        return Err(Error::dims("cut_loss partition", s.size(), partition.len()));
    }
    partition.ensure_non_empty()?;
    let sizes = partition.sizes();
    let ids = partition.ids();
    let mut cross = vec![0.0; partition.clusters()];
    for i in 0..s.size() {
        for j in 0..s.size() {
            if ids[i] != ids[j] {
                cross[ids[i]] += s.matrix()[(i, j)];
                cross[ids[j]] += s.matrix()[(i, j)];
            }
        }
    }
    Ok(0.5
        * cross
            .iter()
            .zip(&sizes)
            .map(|(w, &size)| w / size as f64)
            .sum::<f64>())
}

/// `F = Y (Y'Y)^{-1/2}`: column `j` holds `|R_j|^{-1/2}` on the members of
/// cluster `j` and zero elsewhere.
pub fn scaled_indicator(partition: &ClusterLabels) -> Result<DenseMatrix> {
    partition.ensure_non_empty()?;
    let sizes = partition.sizes();
    let mut f = DMatrix::zeros(partition.len(), partition.clusters());
    for (i, &id) in partition.ids().iter().enumerate() {
        f[(i, id)] = 1.0 / (sizes[id] as f64).sqrt();
    }
    Ok(f)
}
