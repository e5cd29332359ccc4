//! Seeded simulation designs.
//!
//! Rows are grouped by cluster (cluster 0 first). The first `q` columns are
//! the informative features; the remaining `d - q` columns carry no cluster
//! signal.
//!
//! * Independent design: informative feature `j` in cluster `k` is
//!   `N(mu_kj, u_j^2)` with `mu_kj ~ U(1, 10)` and `u_j ~ N(0, 1)` drawn once
//!   per feature. Irrelevant feature `j` is `N(mu_j, u_j^2)` for all rows.
//! * Correlated design: each block is Gaussian with covariance
//!   `rho^|i - j|`, generated feature by feature through the AR(1)
//!   recursion `z_t = rho z_{t-1} + sqrt(1 - rho^2) e_t`. Informative means
//!   are drawn per (cluster, feature), irrelevant means per feature.
//!
//! The informative and irrelevant blocks use separate generator streams,
//! so changing `d` leaves the informative block untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ClusterLabels;
use crate::numcore::DenseMatrix;

const TRUE_STREAM: u64 = 0;
const IRRELEVANT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_per_cluster: usize,
    pub clusters: usize,
    /// Total number of features.
    pub d: usize,
    /// Number of informative features.
    pub q: usize,
    /// Selects the AR(1) design.
    pub correlated: bool,
    pub rho: f64,
    pub seed: u64,
    /// Independent design only: one mean per cluster shared by all
    /// informative features.
    pub shared_mean: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_per_cluster: 40,
            clusters: 5,
            d: 1000,
            q: 10,
            correlated: false,
            rho: 0.5,
            seed: 0,
            shared_mean: false,
        }
    }
}

impl SyntheticSpec {
    /// The reduced scale used for quick experiments: 20 samples per
    /// cluster, 5 clusters, 200 features, 10 informative.
    pub fn desk(seed: u64) -> Self {
        SyntheticSpec { n_per_cluster: 20, d: 200, seed, ..Default::default() }
    }

    pub fn n(&self) -> usize {
        self.n_per_cluster * self.clusters
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters < 2 {
            return Err(Error::InvalidSpec(format!("clusters must be at least 2, got {}", self.clusters)));
        }
        if self.n_per_cluster == 0 {
            return Err(Error::InvalidSpec("n_per_cluster must be positive".into()));
        }
        if self.d == 0 || self.q == 0 || self.q > self.d {
            return Err(Error::InvalidSpec(format!("need 1 <= q <= d, got q = {}, d = {}", self.q, self.d)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidSpec(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub x: DenseMatrix,
    pub labels: ClusterLabels,
    /// Zero-based indices of the informative features, `0..q`.
    pub true_features: Vec<usize>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn balanced_labels(spec: &SyntheticSpec) -> ClusterLabels {
    let ids = (0..spec.clusters).flat_map(|k| std::iter::repeat_n(k, spec.n_per_cluster)).collect();
    ClusterLabels::new(ids, spec.clusters).expect("ids are below the cluster count")
}

fn assemble(spec: &SyntheticSpec, x: DenseMatrix) -> SyntheticDataset {
    SyntheticDataset { x, labels: balanced_labels(spec), true_features: (0..spec.q).collect() }
}

/// Independent design.
pub fn gen_example1(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    if spec.correlated {
        return Err(Error::InvalidSpec("independent design requested with correlated = true".into()));
    }
    Ok(assemble(spec, independent(spec)))
}

/// AR(1) design.
pub fn gen_example2(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    if !spec.correlated {
        return Err(Error::InvalidSpec("AR(1) design requested with correlated = false".into()));
    }
    Ok(assemble(spec, correlated(spec)))
}

/// Dispatches on `spec.correlated`.
pub fn gen_scaled(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    if spec.correlated {
        gen_example2(spec)
    } else {
        gen_example1(spec)
    }
}

fn independent(spec: &SyntheticSpec) -> DenseMatrix {
    let (n, k, q) = (spec.n(), spec.clusters, spec.q);
    let unif = Uniform::new(1.0, 10.0).expect("valid range");
    let mut x = DenseMatrix::zeros(n, spec.d);

    let mut rng = stream(spec.seed, TRUE_STREAM);
    let means: Vec<Vec<f64>> = if spec.shared_mean {
        (0..k).map(|_| vec![unif.sample(&mut rng); q]).collect()
    } else {
        (0..k).map(|_| (0..q).map(|_| unif.sample(&mut rng)).collect()).collect()
    };
    let sds: Vec<f64> = (0..q).map(|_| normal(&mut rng).abs()).collect();
    for i in 0..n {
        let cluster = i / spec.n_per_cluster;
        for j in 0..q {
            x[(i, j)] = means[cluster][j] + sds[j] * normal(&mut rng);
        }
    }

    let mut rng = stream(spec.seed, IRRELEVANT_STREAM);
    let m = spec.d - q;
    let means: Vec<f64> = (0..m).map(|_| unif.sample(&mut rng)).collect();
    let sds: Vec<f64> = (0..m).map(|_| normal(&mut rng).abs()).collect();
    for i in 0..n {
        for j in 0..m {
            x[(i, q + j)] = means[j] + sds[j] * normal(&mut rng);
        }
    }
    x
}

fn ar1_row(rng: &mut impl Rng, rho: f64, out: &mut [f64]) {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut z = 0.0;
    for (t, v) in out.iter_mut().enumerate() {
        let e = normal(rng);
        z = if t == 0 { e } else { rho * z + innovation * e };
        *v = z;
    }
}

fn correlated(spec: &SyntheticSpec) -> DenseMatrix {
    let (n, k, q) = (spec.n(), spec.clusters, spec.q);
    let unif = Uniform::new(1.0, 10.0).expect("valid range");
    let mut x = DenseMatrix::zeros(n, spec.d);
    let mut row = vec![0.0; spec.d];

    let mut rng = stream(spec.seed, TRUE_STREAM);
    let means: Vec<Vec<f64>> = (0..k).map(|_| (0..q).map(|_| unif.sample(&mut rng)).collect()).collect();
    for i in 0..n {
        let cluster = i / spec.n_per_cluster;
        ar1_row(&mut rng, spec.rho, &mut row[..q]);
        for j in 0..q {
            x[(i, j)] = means[cluster][j] + row[j];
        }
    }

    let mut rng = stream(spec.seed, IRRELEVANT_STREAM);
    let m = spec.d - q;
    let means: Vec<f64> = (0..m).map(|_| unif.sample(&mut rng)).collect();
    for i in 0..n {
        ar1_row(&mut rng, spec.rho, &mut row[..m]);
        for j in 0..m {
            x[(i, q + j)] = means[j] + row[j];
        }
    }
    x
}
