//! Unsupervised feature selection that learns pseudo cluster labels on a
//! graph built from two sources: a global self-representation graph, in
//! which every sample is reconstructed from the others under an `l2,1`
//! penalty, and a local Gaussian k-nearest-neighbour graph. Features are
//! ranked by the row norms of a row-sparse regression from the data onto
//! the pseudo labels.
//!
//! ```
//! use golfs::prelude::*;
//!
//! let data = gen_scaled(&SyntheticSpec { n_per_cluster: 8, d: 30, ..SyntheticSpec::desk(1) })?;
//! let x = standardize_columns(&data.x);
//! let l0 = laplacian(&knn_gaussian_similarity(&x, 5, None)?);
//! let p = solve_selfrep(&x, &SelfRepConfig::default())?.coefficients;
//! let l1 = laplacian(&global_similarity(&p)?);
//!
//! let config = GolfsConfig { clusters: 5, ..GolfsConfig::default() };
//! let f0 = initial_pseudo_labels(&l0, &l1, config.lambda, config.clusters)?;
//! let state = golfs_fit(&x, &l0, &l1, &config, &f0)?;
//! let ranking = rank_features(&state.w);
//! assert_eq!(ranking.top(10).len(), 10);
//! # Ok::<(), golfs::Error>(())
//! ```

pub mod baselines;
pub mod cluster_eval;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod harness;
pub mod ingest;
pub mod labels;
pub mod numcore;
pub mod selfrep;
pub mod solver;

pub use error::{Error, Result};
pub use labels::ClusterLabels;
pub use numcore::DenseMatrix;

/// The items most programs need.
pub mod prelude {
    pub use crate::baselines::{benchmark_all_features, ndfs_fit, rsr_feature_select, MethodId};
    pub use crate::cluster_eval::{
        acc, ari, kmeans, nmi, selection_metrics, spectral_cluster, KMeansConfig,
    };
    pub use crate::datagen::{gen_scaled, SyntheticSpec};
    pub use crate::graph::{cut_loss, knn_gaussian_similarity, laplacian, scaled_indicator, SimilarityMatrix};
    pub use crate::harness::{run_pipeline, ExperimentConfig};
    pub use crate::numcore::{standardize_columns, DenseMatrix};
    pub use crate::selfrep::{global_similarity, solve_selfrep, SelfRepConfig};
    pub use crate::solver::{golfs_fit, initial_pseudo_labels, rank_features, GolfsConfig};
    pub use crate::{ClusterLabels, Error, Result};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/graphs.md")]
    struct Graphs;
    #[doc = include_str!("../../../book/src/global-structure.md")]
    struct GlobalStructure;
    #[doc = include_str!("../../../book/src/solver.md")]
    struct Solver;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
