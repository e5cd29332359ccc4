//! Comparison methods built on the same numerical core.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::numcore::DenseMatrix;
use crate::selfrep::{solve_selfrep, SelfRepConfig, SelfRepFit};
use crate::solver::{golfs_fit, rank_features, FeatureRanking, GolfsConfig, SolverState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MethodId {
    Golfs,
    Ndfs,
    Rsr,
    Benchmark,
}

impl MethodId {
    pub const ALL: [MethodId; 4] = [MethodId::Golfs, MethodId::Ndfs, MethodId::Rsr, MethodId::Benchmark];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Golfs => "GOLFS",
            MethodId::Ndfs => "NDFS",
            MethodId::Rsr => "RSR",
            MethodId::Benchmark => "BENCHMARK",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// The local-graph-only special case: no global Laplacian and unit
/// weight on `l0`.
pub fn ndfs_fit(
    x: &DenseMatrix,
    l0: &LaplacianMatrix,
    config: &GolfsConfig,
    f_init: &DenseMatrix,
) -> Result<SolverState> {
    let config = GolfsConfig { lambda: 1.0, ..*config };
    golfs_fit(x, l0, &LaplacianMatrix::zeros(l0.size()), &config, f_init)
}

/// Feature-space self-representation `min_Q ||X - XQ||_{2,1} + kappa
/// ||Q||_{2,1}`, solved as the sample-space problem on `X'`.
pub fn rsr_fit(x: &DenseMatrix, config: &SelfRepConfig) -> Result<SelfRepFit> {
    if x.ncols() < 2 {
        return Err(Error::range("feature count", x.ncols(), "[2, inf)"));
    }
    solve_selfrep(&x.transpose(), config)
}

/// Ranks features by the row norms of the feature-space coefficients.
pub fn rsr_feature_select(x: &DenseMatrix, config: &SelfRepConfig) -> Result<FeatureRanking> {
    Ok(rank_features(&rsr_fit(x, config)?.coefficients))
}

/// Every feature kept in its original order with a common score.
pub fn benchmark_all_features(d: usize) -> FeatureRanking {
    FeatureRanking::from_scores(vec![1.0; d])
}
