use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A hard assignment of `n` items to cluster ids `0..clusters`.
///
/// Ids are zero-based in memory. Label files use one-based ids; see
/// [`crate::ingest::load_labels`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    ids: Vec<usize>,
    clusters: usize,
}

impl ClusterLabels {
    /// Builds labels with an explicit cluster count. Empty clusters are
    /// allowed.
    pub fn new(ids: Vec<usize>, clusters: usize) -> Result<Self> {
        if let Some(&bad) = ids.iter().find(|&&id| id >= clusters) {
            return Err(Error::range("cluster id", bad, format!("[0, {clusters})")));
        }
        Ok(ClusterLabels { ids, clusters })
    }

    /// Builds labels whose cluster count is one past the largest id.
    pub fn from_ids(ids: Vec<usize>) -> Self {
        let clusters = ids.iter().max().map_or(0, |m| m + 1);
        ClusterLabels { ids, clusters }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.clusters];
        for &id in &self.ids {
            sizes[id] += 1;
        }
        sizes
    }

    /// Fails with [`Error::EmptyCluster`] if any cluster has no members.
    pub fn ensure_non_empty(&self) -> Result<()> {
        match self.sizes().iter().position(|&s| s == 0) {
            Some(cluster) => Err(Error::EmptyCluster { cluster }),
            None => Ok(()),
        }
    }
}
