use serde::{Deserialize, Serialize};

use super::assignment::max_weight_assignment;
use crate::error::{Error, Result};
use crate::labels::ClusterLabels;
use crate::numcore::DenseMatrix;
use crate::solver::FeatureRanking;

fn same_length(a: &ClusterLabels, b: &ClusterLabels) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dims("label vectors", a.len(), b.len()));
    }
    Ok(())
}

/// Square count table: entry `(i, j)` counts samples in predicted cluster
/// `i` and true class `j`. The side is the larger of the two cluster counts.
pub fn confusion_matrix(truth: &ClusterLabels, pred: &ClusterLabels) -> Result<Vec<Vec<usize>>> {
    same_length(truth, pred)?;
    let k = truth.clusters().max(pred.clusters());
    let mut table = vec![vec![0; k]; k];
    for (&t, &p) in truth.ids().iter().zip(pred.ids()) {
        table[p][t] += 1;
    }
    Ok(table)
}

/// Fraction of samples whose predicted cluster maps to their class under
/// the best one-to-one matching of cluster ids.
pub fn acc(truth: &ClusterLabels, pred: &ClusterLabels) -> Result<f64> {
    let table = confusion_matrix(truth, pred)?;
    if truth.is_empty() {
        return Err(Error::Undefined { metric: "ACC", reason: "no samples".into() });
    }
    let weight: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let matching = max_weight_assignment(&weight);
    let hits: usize = matching.iter().enumerate().map(|(i, &j)| table[i][j]).sum();
    Ok(hits as f64 / truth.len() as f64)
}

fn entropy_bits(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Mutual information normalized by the geometric mean of the two
/// entropies, in bits. Returns 0 when either labelling is constant.
pub fn nmi(truth: &ClusterLabels, pred: &ClusterLabels) -> Result<f64> {
    let table = confusion_matrix(truth, pred)?;
    if truth.is_empty() {
        return Err(Error::Undefined { metric: "NMI", reason: "no samples".into() });
    }
    let n = truth.len() as f64;
    let pred_sizes: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let true_sizes: Vec<usize> = (0..table.len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h_pred = entropy_bits(pred_sizes.iter().copied(), n);
    let h_true = entropy_bits(true_sizes.iter().copied(), n);
    if h_pred == 0.0 || h_true == 0.0 {
        log::warn!("NMI undefined for a constant labelling; reporting 0");
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            if count > 0 {
                let joint = count as f64 / n;
                mi += joint * (joint * n * n / (pred_sizes[i] as f64 * true_sizes[j] as f64)).log2();
            }
        }
    }
    Ok((mi / (h_pred * h_true).sqrt()).clamp(0.0, 1.0))
}

fn pairs(v: usize) -> i128 {
    let v = v as i128;
    v * (v - 1) / 2
}

/// Adjusted Rand index. When both partitions are trivial in the same way
/// (the index has no room to vary) the score is 1.
pub fn ari(truth: &ClusterLabels, pred: &ClusterLabels) -> Result<f64> {
    let table = confusion_matrix(truth, pred)?;
    if truth.len() < 2 {
        return Err(Error::Undefined { metric: "ARI", reason: "fewer than two samples".into() });
    }
    // Pair counts are integers; (index - expected) / (max - expected) is
    // evaluated with the denominators cleared so only one rounding occurs.
    let index: i128 = table.iter().flatten().map(|&v| pairs(v)).sum();
    let rows: i128 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: i128 = (0..table.len()).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(truth.len());
    let numer = 2 * (index * total - rows * cols);
    let denom = (rows + cols) * total - 2 * rows * cols;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(numer as f64 / denom as f64)
}

/// True-positive counts and cover indicators for the top `s` features.
///
/// Features whose scores tie across the cut-off are treated as a random
/// draw from the tied group, so `tp` is the expected hit count and `cp`
/// the probability that every true feature lands inside the cut. Without
/// ties both reduce to the plain count and indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub s_values: Vec<usize>,
    pub tp: Vec<f64>,
    pub cp: Vec<f64>,
}

pub fn selection_metrics(
    ranking: &FeatureRanking,
    true_set: &[usize],
    s_values: &[usize],
) -> Result<SelectionRecord> {
    let d = ranking.len();
    if true_set.is_empty() {
        return Err(Error::InvalidConfig("true feature set is empty".into()));
    }
    if let Some(&bad) = true_set.iter().find(|&&j| j >= d) {
        return Err(Error::range("true feature index", bad, format!("[0, {d})")));
    }
    let mut is_true = vec![false; d];
    for &j in true_set {
        is_true[j] = true;
    }
    let q = is_true.iter().filter(|&&t| t).count();
    let mut tp = Vec::with_capacity(s_values.len());
    let mut cp = Vec::with_capacity(s_values.len());
    for &s in s_values {
        if s == 0 || s > d {
            return Err(Error::range("s", s, format!("[1, {d}]")));
        }
        let cutoff = ranking.scores[ranking.order[s - 1]];
        let (mut above, mut hits_above, mut tied, mut hits_tied) = (0usize, 0usize, 0usize, 0usize);
        for j in 0..d {
            let score = ranking.scores[j];
            if score > cutoff {
                above += 1;
                hits_above += is_true[j] as usize;
            } else if score == cutoff {
                tied += 1;
                hits_tied += is_true[j] as usize;
            }
        }
        let slots = s - above;
        tp.push(hits_above as f64 + slots as f64 * hits_tied as f64 / tied as f64);
        let need = q - hits_above;
        let cover = if need > hits_tied || need > slots {
            0.0
        } else {
            (0..need).map(|i| (slots - i) as f64 / (tied - i) as f64).product()
        };
        cp.push(cover);
    }
    Ok(SelectionRecord { s_values: s_values.to_vec(), tp, cp })
}

/// Cluster-quality measures that need no ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalMetrics {
    /// Mean Euclidean distance over all within-cluster pairs.
    pub aid: f64,
    /// Calinski-Harabasz score.
    pub chs: f64,
    /// Davies-Bouldin index.
    pub dbi: f64,
}

pub fn internal_metrics(x: &DenseMatrix, labels: &ClusterLabels) -> Result<InternalMetrics> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::dims("labels", n, labels.len()));
    }
    let ids = labels.ids();
    let present: Vec<usize> = labels.sizes().iter().enumerate().filter(|(_, &s)| s > 0).map(|(k, _)| k).collect();
    let c = present.len();
    if c < 2 || c >= n {
        return Err(Error::Undefined {
            metric: "CHS/DBI",
            reason: format!("need 2 <= clusters < n, got {c} non-empty clusters for {n} samples"),
        });
    }
    let dist = |a: usize, b: usize| (x.row(a) - x.row(b)).norm();

    let (mut total, mut count) = (0.0, 0usize);
    for a in 0..n {
        for b in (a + 1)..n {
            if ids[a] == ids[b] {
                total += dist(a, b);
                count += 1;
            }
        }
    }
    let aid = if count == 0 { 0.0 } else { total / count as f64 };

    let mean = x.row_mean();
    let sizes = labels.sizes();
    let mut centroids = DenseMatrix::zeros(labels.clusters(), x.ncols());
    for (i, &k) in ids.iter().enumerate() {
        let mut row = centroids.row_mut(k);
        row += x.row(i);
    }
    for &k in &present {
        let scaled = centroids.row(k) / sizes[k] as f64;
        centroids.set_row(k, &scaled);
    }

    let mut within = 0.0;
    let mut spread = vec![0.0; labels.clusters()];
    for (i, &k) in ids.iter().enumerate() {
        let diff = x.row(i) - centroids.row(k);
        within += diff.norm_squared();
        spread[k] += diff.norm();
    }
    let between: f64 = present.iter().map(|&k| sizes[k] as f64 * (centroids.row(k) - &mean).norm_squared()).sum();
    let chs = if within == 0.0 {
        1.0
    } else {
        between * (n - c) as f64 / (within * (c - 1) as f64)
    };

    for &k in &present {
        spread[k] /= sizes[k] as f64;
    }
    let mut dbi = 0.0;
    for &a in &present {
        let mut worst = 0.0f64;
        for &b in &present {
            if a != b {
                let sep = (centroids.row(a) - centroids.row(b)).norm();
                if sep > 0.0 {
                    worst = worst.max((spread[a] + spread[b]) / sep);
                }
            }
        }
        dbi += worst;
    }
    Ok(InternalMetrics { aid, chs, dbi: dbi / c as f64 })
}
