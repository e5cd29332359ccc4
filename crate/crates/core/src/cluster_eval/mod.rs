//! Clustering algorithms and agreement and quality scores.

mod assignment;
mod kmeans;
mod metrics;

pub use kmeans::{kmeans, spectral_cluster, KMeansConfig, KMeansFit};
pub use metrics::{
    acc, ari, confusion_matrix, internal_metrics, nmi, selection_metrics, InternalMetrics,
    SelectionRecord,
};
