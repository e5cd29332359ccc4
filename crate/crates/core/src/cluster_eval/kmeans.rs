use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian, SimilarityMatrix};
use crate::labels::ClusterLabels;
use crate::numcore::{sym_eigen_smallest, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative WCSS change that ends a run.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { restarts: 20, max_iter: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub labels: ClusterLabels,
    /// Within-cluster sum of squared distances to the centroids.
    pub wcss: f64,
    pub centroids: DenseMatrix,
}

fn sq_dist(x: &DenseMatrix, i: usize, centers: &DenseMatrix, k: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..x.ncols() {
        let diff = x[(i, j)] - centers[(k, j)];
        acc += diff * diff;
    }
    acc
}

/// k-means++ seeding: first center uniform, later centers sampled with
/// probability proportional to the squared distance to the nearest chosen
/// center.
fn seed_centers(x: &DenseMatrix, c: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = x.nrows();
    let mut centers = DenseMatrix::zeros(c, x.ncols());
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.set_row(0, &x.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centers, 0)).collect();

    for k in 1..c {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // every remaining point coincides with a center
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centers.set_row(k, &x.row(pick));
        for (i, near) in nearest.iter_mut().enumerate() {
            *near = near.min(sq_dist(x, i, &centers, k));
        }
    }
    centers
}

fn assign(x: &DenseMatrix, centers: &DenseMatrix, ids: &mut [usize]) -> f64 {
    let mut wcss = 0.0;
    for (i, id) in ids.iter_mut().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for k in 0..centers.nrows() {
            let d = sq_dist(x, i, centers, k);
            if d < best.0 {
                best = (d, k);
            }
        }
        *id = best.1;
        wcss += best.0;
    }
    wcss
}

fn recenter(x: &DenseMatrix, ids: &[usize], centers: &mut DenseMatrix) {
    let c = centers.nrows();
    let mut counts = vec![0usize; c];
    let mut sums = DenseMatrix::zeros(c, x.ncols());
    for (i, &k) in ids.iter().enumerate() {
        counts[k] += 1;
        let mut row = sums.row_mut(k);
        row += x.row(i);
    }
    for k in 0..c {
        if counts[k] > 0 {
            centers.set_row(k, &(sums.row(k) / counts[k] as f64));
        }
    }
    // An empty cluster takes over the point farthest from its own center.
    for k in 0..c {
        if counts[k] == 0 {
            let far = (0..x.nrows())
                .map(|i| (sq_dist(x, i, centers, ids[i]), i))
                .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
                .1;
            centers.set_row(k, &x.row(far));
        }
    }
}

fn lloyd(x: &DenseMatrix, c: usize, config: &KMeansConfig, rng: &mut ChaCha8Rng) -> KMeansFit {
    let mut centers = seed_centers(x, c, rng);
    let mut ids = vec![0; x.nrows()];
    let mut wcss = assign(x, &centers, &mut ids);
    for _ in 0..config.max_iter {
        recenter(x, &ids, &mut centers);
        let previous = ids.clone();
        let next = assign(x, &centers, &mut ids);
        let change = (wcss - next).abs();
        wcss = next;
        if ids == previous || change <= config.tol * wcss.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    recenter(x, &ids, &mut centers);
    let wcss = assign(x, &centers, &mut ids);
    KMeansFit { labels: ClusterLabels::new(ids, c).expect("ids below c"), wcss, centroids: centers }
}

/// Best of `config.restarts` Lloyd runs by WCSS. Restart `r` draws from
/// stream `r` of a generator seeded with `seed`; ties go to the lower
/// restart index.
pub fn kmeans(x: &DenseMatrix, c: usize, config: &KMeansConfig, seed: u64) -> Result<KMeansFit> {
    let n = x.nrows();
    if c == 0 || c > n {
        return Err(Error::range("clusters", c, format!("[1, {n}]")));
    }
    if config.restarts == 0 {
        return Err(Error::range("restarts", 0, "[1, inf)"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "k-means input" });
    }
    let fits: Vec<KMeansFit> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(x, c, config, &mut rng)
        })
        .collect();
    let best = fits
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.wcss.total_cmp(&b.wcss).then(i.cmp(j)))
        .expect("at least one restart")
        .1;
    Ok(best)
}

/// Unnormalized spectral clustering: k-means on the rows of the `c`
/// smallest Laplacian eigenvectors.
pub fn spectral_cluster(
    s: &SimilarityMatrix,
    c: usize,
    config: &KMeansConfig,
    seed: u64,
) -> Result<ClusterLabels> {
    let n = s.size();
    if c == 0 || c > n {
        return Err(Error::range("clusters", c, format!("[1, {n}]")));
    }
    if c == 1 {
        return ClusterLabels::new(vec![0; n], 1);
    }
    let embedding = sym_eigen_smallest(laplacian(s).matrix(), c)?.vectors;
    Ok(kmeans(&embedding, c, config, seed)?.labels)
}
