//! End-to-end experiments: data, graphs, fits, tuning, clustering and
//! aggregation.
//!
//! Repeat `r` uses seed `base + r` for data generation and
//! `base + r + KMEANS_SEED_OFFSET` for k-means, so every method in a repeat
//! sees the same data and the same clustering seeds.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{benchmark_all_features, ndfs_fit, rsr_feature_select, MethodId};
use crate::cluster_eval::{
    acc, ari, internal_metrics, kmeans, nmi, selection_metrics, KMeansConfig, SelectionRecord,
};
use crate::datagen::{gen_scaled, SyntheticSpec};
use crate::error::{Error, Result};
use crate::graph::{knn_gaussian_similarity, laplacian, LaplacianMatrix};
use crate::ingest::{load_labels, load_matrix};
use crate::labels::ClusterLabels;
use crate::numcore::{standardize_columns, DenseMatrix};
use crate::selfrep::{global_similarity, solve_selfrep, SelfRepConfig};
use crate::solver::{golfs_fit, initial_pseudo_labels, rank_features, FeatureRanking, GolfsConfig};

pub const KMEANS_SEED_OFFSET: u64 = 1_000_003;

/// Where the observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// A fresh draw per repeat; `spec.seed` is replaced by the repeat seed.
    Synthetic(SyntheticSpec),
    /// A matrix CSV, optional one-based label file and optional zero-based
    /// informative feature indices.
    Files {
        matrix: PathBuf,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        true_features: Option<Vec<usize>>,
        #[serde(default)]
        clusters: Option<usize>,
    },
}

/// Score maximized by the grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Accuracy, ties broken by NMI.
    #[default]
    Acc,
    /// NMI, ties broken by accuracy.
    Nmi,
    /// Calinski-Harabasz score; needs no labels.
    Chs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Used when labels are available; otherwise [`Criterion::Chs`].
    pub criterion: Criterion,
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid::coarse()
    }
}

impl TuningGrid {
    /// `{1e-2, 1, 1e2}` for every parameter.
    pub fn coarse() -> Self {
        let g = vec![1e-2, 1.0, 1e2];
        TuningGrid { alpha: g.clone(), beta: g.clone(), lambda: g.clone(), kappa: g, criterion: Criterion::Acc }
    }

    /// Decades `1e-6..=1e6` for every parameter.
    pub fn full() -> Self {
        let g: Vec<f64> = (-6..=6).map(|e| 10f64.powi(e)).collect();
        TuningGrid { alpha: g.clone(), beta: g.clone(), lambda: g.clone(), kappa: g, criterion: Criterion::Acc }
    }

    /// The parameter combinations visited for `method`, in grid order.
    pub fn points(&self, method: MethodId) -> Vec<TuningParams> {
        let mut out = Vec::new();
        match method {
            MethodId::Golfs => {
                for &kappa in &self.kappa {
                    for &lambda in &self.lambda {
                        for &alpha in &self.alpha {
                            for &beta in &self.beta {
                                out.push(TuningParams {
                                    alpha: Some(alpha),
                                    beta: Some(beta),
                                    lambda: Some(lambda),
                                    kappa: Some(kappa),
                                });
                            }
                        }
                    }
                }
            }
            MethodId::Ndfs => {
                for &alpha in &self.alpha {
                    for &beta in &self.beta {
                        out.push(TuningParams { alpha: Some(alpha), beta: Some(beta), ..Default::default() });
                    }
                }
            }
            MethodId::Rsr => {
                for &kappa in &self.kappa {
                    out.push(TuningParams { kappa: Some(kappa), ..Default::default() });
                }
            }
            MethodId::Benchmark => out.push(TuningParams::default()),
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TuningParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub methods: Vec<MethodId>,
    pub data: DataSource,
    pub knn_k: usize,
    pub sigma: Option<f64>,
    pub standardize: bool,
    pub golfs: GolfsConfig,
    pub selfrep: SelfRepConfig,
    pub kmeans: KMeansConfig,
    pub s_values: Vec<usize>,
    pub top_feature_grid: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub tuning: TuningGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::desk()
    }
}

impl ExperimentConfig {
    /// 100 samples in 5 clusters, 200 features of which 10 informative,
    /// 10 repeats, coarse grids.
    pub fn desk() -> Self {
        ExperimentConfig {
            experiment: "example1-desk".into(),
            methods: MethodId::ALL.to_vec(),
            data: DataSource::Synthetic(SyntheticSpec::desk(0)),
            knn_k: 5,
            sigma: None,
            standardize: true,
            golfs: GolfsConfig::default(),
            selfrep: SelfRepConfig::default(),
            kmeans: KMeansConfig::default(),
            s_values: vec![10, 30, 60],
            top_feature_grid: vec![10, 20, 30, 40, 50],
            repeats: 10,
            seed: 0,
            tuning: TuningGrid::coarse(),
        }
    }

    /// 200 samples, 1000 features, 100 repeats, 13-point grids and top-s
    /// from 10 to 150.
    pub fn full_scale() -> Self {
        ExperimentConfig {
            experiment: "example1-full".into(),
            data: DataSource::Synthetic(SyntheticSpec::default()),
            top_feature_grid: (1..=15).map(|k| 10 * k).collect(),
            repeats: 100,
            tuning: TuningGrid::full(),
            ..ExperimentConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if self.top_feature_grid.is_empty() || self.top_feature_grid.contains(&0) {
            return Err(Error::InvalidConfig("top_feature_grid needs positive entries".into()));
        }
        let g = &self.tuning;
        for (name, values) in [("alpha", &g.alpha), ("beta", &g.beta), ("lambda", &g.lambda), ("kappa", &g.kappa)] {
            if values.is_empty() {
                return Err(Error::InvalidConfig(format!("tuning grid for {name} is empty")));
            }
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        self.selfrep.validate()?;
        Ok(())
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }

    pub fn kmeans_seed(&self, repeat: usize) -> u64 {
        self.repeat_seed(repeat).wrapping_add(KMEANS_SEED_OFFSET)
    }
}

/// Observations ready for fitting.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Standardized unless the config disables it.
    pub x: DenseMatrix,
    pub labels: Option<ClusterLabels>,
    pub true_features: Option<Vec<usize>>,
    pub clusters: usize,
}

pub fn prepare_data(config: &ExperimentConfig, repeat: usize) -> Result<PreparedData> {
    let (x, labels, true_features, clusters) = match &config.data {
        DataSource::Synthetic(spec) => {
            let spec = SyntheticSpec { seed: config.repeat_seed(repeat), ..spec.clone() };
            let ds = gen_scaled(&spec)?;
            let c = spec.clusters;
            (ds.x, Some(ds.labels), Some(ds.true_features), c)
        }
        DataSource::Files { matrix, has_header, labels, true_features, clusters } => {
            let x = load_matrix(matrix, *has_header)?;
            let labels = labels.as_ref().map(load_labels).transpose()?;
            if let Some(l) = &labels {
                if l.len() != x.nrows() {
                    return Err(Error::dims("label file", x.nrows(), l.len()));
                }
            }
            let c = clusters
                .or_else(|| labels.as_ref().map(|l| l.clusters()))
                .ok_or_else(|| Error::InvalidConfig("cluster count unknown: give `clusters` or a label file".into()))?;
            (x, labels, true_features.clone(), c)
        }
    };
    let x = if config.standardize { standardize_columns(&x) } else { x };
    Ok(PreparedData { x, labels, true_features, clusters })
}

/// Clustering scores for one feature subset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dbi: Option<f64>,
}

impl MetricRecord {
    pub fn named(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("acc", self.acc),
            ("nmi", self.nmi),
            ("ari", self.ari),
            ("aid", self.aid),
            ("chs", self.chs),
            ("dbi", self.dbi),
        ]
    }

    /// Primary score and tie-breaker under `criterion`.
    fn score(&self, criterion: Criterion) -> Option<(f64, f64)> {
        match criterion {
            Criterion::Acc => Some((self.acc?, self.nmi?)),
            Criterion::Nmi => Some((self.nmi?, self.acc?)),
            Criterion::Chs => Some((self.chs?, 0.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub labels: ClusterLabels,
    pub metrics: MetricRecord,
}

/// k-means on the given columns (in ascending index order), scored against
/// `truth` when present.
pub fn evaluate_subset(
    x: &DenseMatrix,
    features: &[usize],
    truth: Option<&ClusterLabels>,
    clusters: usize,
    kmeans_config: &KMeansConfig,
    seed: u64,
) -> Result<Evaluation> {
    let mut cols = features.to_vec();
    cols.sort_unstable();
    let xs = x.select_columns(&cols);
    let fit = kmeans(&xs, clusters, kmeans_config, seed)?;
    let mut metrics = MetricRecord::default();
    if let Some(t) = truth {
        metrics.acc = Some(acc(t, &fit.labels)?);
        metrics.nmi = Some(nmi(t, &fit.labels)?);
        metrics.ari = Some(ari(t, &fit.labels)?);
    }
    match internal_metrics(&xs, &fit.labels) {
        Ok(m) => {
            metrics.aid = Some(m.aid);
            metrics.chs = Some(m.chs);
            metrics.dbi = Some(m.dbi);
        }
        Err(e) => log::debug!("internal metrics skipped: {e}"),
    }
    Ok(Evaluation { labels: fit.labels, metrics })
}

/// One visited grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: TuningParams,
    /// Best score over the top-s grid.
    pub score: Option<f64>,
    pub top_s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip)]
    tie_break: f64,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub method: MethodId,
    pub best: usize,
    pub points: Vec<GridPoint>,
    pub ranking: FeatureRanking,
    pub evaluation: Evaluation,
}

impl GridOutcome {
    pub fn best_point(&self) -> &GridPoint {
        &self.points[self.best]
    }
}

/// Laplacians shared by all grid points of one dataset.
pub struct GraphCache<'a> {
    x: &'a DenseMatrix,
    selfrep: SelfRepConfig,
    pub l0: LaplacianMatrix,
    global: Mutex<Vec<(u64, std::result::Result<LaplacianMatrix, String>)>>,
}

impl<'a> GraphCache<'a> {
    pub fn new(x: &'a DenseMatrix, knn_k: usize, sigma: Option<f64>, selfrep: SelfRepConfig) -> Result<Self> {
        let l0 = laplacian(&knn_gaussian_similarity(x, knn_k, sigma)?);
        Ok(GraphCache { x, selfrep, l0, global: Mutex::new(Vec::new()) })
    }

    /// Global Laplacian for `kappa`, computed once.
    pub fn global(&self, kappa: f64) -> Result<LaplacianMatrix> {
        let key = kappa.to_bits();
        if let Some((_, hit)) = self.global.lock().expect("cache lock").iter().find(|(k, _)| *k == key) {
            return hit.clone().map_err(|e| Error::InvalidConfig(format!("stage 1 failed: {e}")));
        }
        let computed = solve_selfrep(self.x, &SelfRepConfig { kappa, ..self.selfrep })
            .and_then(|fit| global_similarity(&fit.coefficients))
            .map(|s| laplacian(&s));
        let stored = computed.as_ref().map(Clone::clone).map_err(|e| e.to_string());
        self.global.lock().expect("cache lock").push((key, stored));
        computed
    }
}

/// Fits `method` at `params` and ranks the features.
pub fn fit_ranking(
    method: MethodId,
    params: &TuningParams,
    graphs: &GraphCache<'_>,
    config: &ExperimentConfig,
    clusters: usize,
) -> Result<FeatureRanking> {
    let x = graphs.x;
    let base = GolfsConfig { clusters, ..config.golfs };
    match method {
        MethodId::Golfs => {
            let golfs = GolfsConfig {
                alpha: params.alpha.unwrap_or(base.alpha),
                beta: params.beta.unwrap_or(base.beta),
                lambda: params.lambda.unwrap_or(base.lambda),
                ..base
            };
            let l1 = graphs.global(params.kappa.unwrap_or(config.selfrep.kappa))?;
            let f0 = initial_pseudo_labels(&graphs.l0, &l1, golfs.lambda, clusters)?;
            Ok(rank_features(&golfs_fit(x, &graphs.l0, &l1, &golfs, &f0)?.w))
        }
        MethodId::Ndfs => {
            let ndfs = GolfsConfig {
                alpha: params.alpha.unwrap_or(base.alpha),
                beta: params.beta.unwrap_or(base.beta),
                lambda: 1.0,
                ..base
            };
            let zero = LaplacianMatrix::zeros(x.nrows());
            let f0 = initial_pseudo_labels(&graphs.l0, &zero, 1.0, clusters)?;
            Ok(rank_features(&ndfs_fit(x, &graphs.l0, &ndfs, &f0)?.w))
        }
        MethodId::Rsr => {
            let cfg = SelfRepConfig { kappa: params.kappa.unwrap_or(config.selfrep.kappa), ..config.selfrep };
            rsr_feature_select(x, &cfg)
        }
        MethodId::Benchmark => Ok(benchmark_all_features(x.ncols())),
    }
}

/// Ranking, chosen subset size, its evaluation and `(score, tie_break)`.
type PointFit = (FeatureRanking, usize, Evaluation, (f64, f64));

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
}

/// Visits every grid point for `method`, clusters on each top-s subset and
/// keeps the best point. Ties go to the earlier grid point and, within a
/// point, to the smaller `s`.
pub fn grid_search(
    config: &ExperimentConfig,
    data: &PreparedData,
    graphs: &GraphCache<'_>,
    method: MethodId,
    kmeans_seed: u64,
) -> Result<GridOutcome> {
    let d = data.x.ncols();
    let criterion = if data.labels.is_some() { config.tuning.criterion } else { Criterion::Chs };
    let sizes: Vec<usize> = if method == MethodId::Benchmark {
        vec![d]
    } else {
        let mut s: Vec<usize> = config.top_feature_grid.iter().map(|&s| s.min(d)).collect();
        s.dedup();
        s
    };
    let memo: Mutex<HashMap<Vec<usize>, Evaluation>> = Mutex::new(HashMap::new());
    let evaluate = |features: &[usize]| -> Result<Evaluation> {
        let mut key = features.to_vec();
        key.sort_unstable();
        if let Some(hit) = memo.lock().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let eval = evaluate_subset(&data.x, &key, data.labels.as_ref(), data.clusters, &config.kmeans, kmeans_seed)?;
        memo.lock().expect("memo lock").insert(key, eval.clone());
        Ok(eval)
    };

    let params = config.tuning.points(method);
    let results: Vec<Result<PointFit>> = params
        .par_iter()
        .map(|p| {
            let ranking = fit_ranking(method, p, graphs, config, data.clusters)?;
            let mut best: Option<(usize, Evaluation, (f64, f64))> = None;
            for &s in &sizes {
                let eval = evaluate(ranking.top(s))?;
                let score = eval.metrics.score(criterion).ok_or_else(|| Error::Undefined {
                    metric: "grid criterion",
                    reason: "clustering produced a single cluster".into(),
                })?;
                if best.as_ref().is_none_or(|(_, _, b)| better(score, *b)) {
                    best = Some((s, eval, score));
                }
            }
            let (s, eval, score) = best.expect("at least one subset size");
            Ok((ranking, s, eval, score))
        })
        .collect();

    let mut points = Vec::with_capacity(params.len());
    let mut best: Option<(usize, FeatureRanking, Evaluation, (f64, f64))> = None;
    let mut last_error = None;
    for (i, (p, r)) in params.iter().zip(results).enumerate() {
        match r {
            Ok((ranking, s, eval, score)) => {
                points.push(GridPoint { params: *p, score: Some(score.0), top_s: Some(s), error: None, tie_break: score.1 });
                if best.as_ref().is_none_or(|(_, _, _, b)| better(score, *b)) {
                    best = Some((i, ranking, eval, score));
                }
            }
            Err(e) => {
                log::warn!("{method} grid point {p:?} failed: {e}");
                last_error = Some(e.to_string());
                points.push(GridPoint { params: *p, score: None, top_s: None, error: Some(e.to_string()), tie_break: 0.0 });
            }
        }
    }
    let (best, ranking, evaluation, _) = best.ok_or_else(|| Error::AllGridPointsFailed {
        last_error: last_error.unwrap_or_default(),
    })?;
    Ok(GridOutcome { method, best, points, ranking, evaluation })
}

/// Result of one method on one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<TuningParams>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top_s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<MetricRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection: Option<SelectionRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

/// Mean and sample standard deviation; `sd` is absent for a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sd: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Summary { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub s_values: Vec<usize>,
    pub tp: Vec<Summary>,
    pub cp: Vec<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub name: MethodId,
    pub metrics: BTreeMap<String, Summary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection: Option<SelectionSummary>,
    pub repeats: Vec<RepeatRecord>,
}

impl MethodReport {
    pub fn from_repeats(name: MethodId, repeats: Vec<RepeatRecord>) -> Self {
        let ok: Vec<&RepeatRecord> = repeats.iter().filter(|r| r.failure.is_none()).collect();
        let mut metrics = BTreeMap::new();
        for (i, (key, _)) in MetricRecord::default().named().iter().enumerate() {
            let values: Vec<f64> = ok.iter().filter_map(|r| r.metrics.and_then(|m| m.named()[i].1)).collect();
            if let Some(s) = Summary::of(&values) {
                metrics.insert(key.to_string(), s);
            }
        }
        let selection = ok.first().and_then(|r| r.selection.as_ref()).map(|first| {
            let records: Vec<&SelectionRecord> = ok.iter().filter_map(|r| r.selection.as_ref()).collect();
            let column = |pick: &dyn Fn(&SelectionRecord) -> &Vec<f64>, j: usize| {
                Summary::of(&records.iter().map(|r| pick(r)[j]).collect::<Vec<_>>()).expect("non-empty")
            };
            SelectionSummary {
                s_values: first.s_values.clone(),
                tp: (0..first.s_values.len()).map(|j| column(&|r| &r.tp, j)).collect(),
                cp: (0..first.s_values.len()).map(|j| column(&|r| &r.cp, j)).collect(),
            }
        });
        MethodReport { name, metrics, selection, repeats }
    }

    pub fn metric(&self, key: &str) -> Option<Summary> {
        self.metrics.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub s_values: Vec<usize>,
    pub methods: Vec<MethodReport>,
    #[serde(skip)]
    pub runtime: Duration,
}

impl ExperimentReport {
    pub fn method(&self, id: MethodId) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.name == id)
    }
}

/// All methods on one repeat.
pub fn run_repeat(config: &ExperimentConfig, repeat: usize) -> Vec<RepeatRecord> {
    let seed = config.repeat_seed(repeat);
    let failed = |message: String| RepeatRecord {
        repeat,
        seed,
        params: None,
        top_s: None,
        metrics: None,
        selection: None,
        failure: Some(message),
    };
    let setup_failed = |e: Error| {
        log::warn!("repeat {repeat} failed during setup: {e}");
        config.methods.iter().map(|_| failed(e.to_string())).collect()
    };
    let data = match prepare_data(config, repeat) {
        Ok(d) => d,
        Err(e) => return setup_failed(e),
    };
    let graphs = match GraphCache::new(&data.x, config.knn_k, config.sigma, config.selfrep) {
        Ok(g) => g,
        Err(e) => return setup_failed(e),
    };
    config
        .methods
        .iter()
        .map(|&method| {
            let outcome = grid_search(config, &data, &graphs, method, config.kmeans_seed(repeat)).and_then(|g| {
                let selection = match &data.true_features {
                    Some(t) => {
                        let s: Vec<usize> = config.s_values.iter().copied().filter(|&s| s <= data.x.ncols()).collect();
                        Some(selection_metrics(&g.ranking, t, &s)?)
                    }
                    None => None,
                };
                Ok((g, selection))
            });
            match outcome {
                Ok((g, selection)) => RepeatRecord {
                    repeat,
                    seed,
                    params: Some(g.best_point().params),
                    top_s: g.best_point().top_s,
                    metrics: Some(g.evaluation.metrics),
                    selection,
                    failure: None,
                },
                Err(e) => {
                    log::warn!("repeat {repeat}, {method}: {e}");
                    failed(e.to_string())
                }
            }
        })
        .collect()
}

/// Runs every repeat and aggregates per method.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let per_repeat: Vec<Vec<RepeatRecord>> =
        (0..config.repeats).into_par_iter().map(|r| run_repeat(config, r)).collect();
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(m, &id)| MethodReport::from_repeats(id, per_repeat.iter().map(|rows| rows[m].clone()).collect()))
        .collect();
    Ok(ExperimentReport {
        experiment: config.experiment.clone(),
        seed: config.seed,
        s_values: config.s_values.clone(),
        methods,
        runtime: start.elapsed(),
    })
}
