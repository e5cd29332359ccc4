use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use golfs::baselines::MethodId;
use golfs::cluster_eval::{acc, ari, nmi};
use golfs::datagen::{gen_scaled, SyntheticSpec};
use golfs::harness::{
    evaluate_subset, fit_ranking, grid_search, prepare_data, run_pipeline, DataSource, ExperimentConfig,
    GraphCache, PreparedData, TuningParams,
};
use golfs::ingest::{
    load_feature_list, load_labels, report_csv, report_json, save_feature_list, save_labels, save_matrix,
    ReportFormat,
};
use golfs::{Error, Result};

const OUT_DIR_VAR: &str = "GOLFS_OUT_DIR";

/// Unsupervised feature selection with global and local structure.
#[derive(Parser, Debug)]
#[command(name = "golfs", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file. Relative paths are placed under $GOLFS_OUT_DIR when set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format: csv or json.
    #[arg(long, global = true)]
    format: Option<ReportFormat>,
    /// Start from the full-scale profile instead of the desk profile.
    #[arg(long = "paper-scale", alias = "full-scale", global = true)]
    full_scale: bool,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Matrix CSV, one sample per row. Defaults to the configured data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// The matrix file starts with a header row.
    #[arg(long)]
    header: bool,
    /// One-based cluster labels, one per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    clusters: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset; labels and informative features go next to it.
    Generate {
        /// 1 for independent features, 2 for AR(1) blocks.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        example: u8,
        #[arg(long)]
        n_per_cluster: Option<usize>,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Rank features and print the top ones, one-based, one per line.
    Select {
        #[arg(long, default_value = "golfs")]
        method: MethodId,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 50)]
        top: usize,
    },
    /// Run k-means on a feature subset and print one-based labels.
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        /// One-based feature indices; all features when absent.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Compare two label files.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Run the full experiment and write the report.
    Bench,
    /// Grid-search one method on the first repeat and print every grid point.
    Tune {
        #[arg(long, default_value = "golfs")]
        method: MethodId,
        #[command(flatten)]
        data: DataArgs,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let opts = &cli.global;
    let mut config = load_config(opts)?;
    match cli.command {
        Command::Generate { example, n_per_cluster, clusters, d, q, rho } => {
            let mut spec = match &config.data {
                DataSource::Synthetic(spec) => spec.clone(),
                DataSource::Files { .. } => SyntheticSpec::desk(0),
            };
            spec.seed = config.seed;
            spec.correlated = example == 2;
            spec.n_per_cluster = n_per_cluster.unwrap_or(spec.n_per_cluster);
            spec.clusters = clusters.unwrap_or(spec.clusters);
            spec.d = d.unwrap_or(spec.d);
            spec.q = q.unwrap_or(spec.q);
            spec.rho = rho.unwrap_or(spec.rho);
            let ds = gen_scaled(&spec)?;
            let out = output_path(opts.out.as_deref().unwrap_or(Path::new("data.csv")))?;
            save_matrix(&out, &ds.x)?;
            save_labels(sibling(&out, "labels.txt"), &ds.labels)?;
            save_feature_list(sibling(&out, "features.txt"), &ds.true_features)
        }
        Command::Select { method, data, top } => {
            apply_data(&mut config, data);
            let prepared = prepare_data(&config, 0)?;
            let graphs = GraphCache::new(&prepared.x, config.knn_k, config.sigma, config.selfrep)?;
            let ranking = fit_ranking(method, &TuningParams::default(), &graphs, &config, prepared.clusters)?;
            let features = ranking.top(top).to_vec();
            match &opts.out {
                Some(path) => save_feature_list(output_path(path)?, &features),
                None => emit(None, &features.iter().map(|j| format!("{}\n", j + 1)).collect::<String>()),
            }
        }
        Command::Cluster { data, features } => {
            apply_data(&mut config, data);
            let prepared = prepare_data(&config, 0)?;
            let features = match features {
                Some(path) => check_features(load_feature_list(path)?, prepared.x.ncols())?,
                None => (0..prepared.x.ncols()).collect(),
            };
            let eval = cluster(&config, &prepared, &features)?;
            if prepared.labels.is_some() {
                log::info!("acc {:?}, nmi {:?}", eval.metrics.acc, eval.metrics.nmi);
            }
            match &opts.out {
                Some(path) => save_labels(output_path(path)?, &eval.labels),
                None => emit(None, &eval.labels.ids().iter().map(|k| format!("{}\n", k + 1)).collect::<String>()),
            }
        }
        Command::Evaluate { truth, pred } => {
            let (truth, pred) = (load_labels(truth)?, load_labels(pred)?);
            let scores = [("acc", acc(&truth, &pred)?), ("nmi", nmi(&truth, &pred)?), ("ari", ari(&truth, &pred)?)];
            let text = match opts.format.unwrap_or(ReportFormat::Json) {
                ReportFormat::Json => {
                    let map: serde_json::Map<String, serde_json::Value> =
                        scores.iter().map(|(k, v)| (k.to_string(), (*v).into())).collect();
                    format!("{}\n", serde_json::to_string_pretty(&map)?)
                }
                ReportFormat::Csv => {
                    let mut text = String::from("metric,value\n");
                    for (k, v) in scores {
                        text.push_str(&format!("{k},{v:.4}\n"));
                    }
                    text
                }
            };
            emit(opts.out.as_deref(), &text)
        }
        Command::Bench => {
            let report = run_pipeline(&config)?;
            log::info!("bench finished in {:.1?}", report.runtime);
            let format = opts.format.unwrap_or_else(|| match &opts.out {
                Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => ReportFormat::Json,
                _ => ReportFormat::Csv,
            });
            let text = match format {
                ReportFormat::Csv => report_csv(&report)?,
                ReportFormat::Json => report_json(&report)?,
            };
            emit(opts.out.as_deref(), &text)
        }
        Command::Tune { method, data } => {
            apply_data(&mut config, data);
            let prepared = prepare_data(&config, 0)?;
            let graphs = GraphCache::new(&prepared.x, config.knn_k, config.sigma, config.selfrep)?;
            let outcome = grid_search(&config, &prepared, &graphs, method, config.kmeans_seed(0))?;
            let best = outcome.best_point();
            let value = serde_json::json!({
                "method": method,
                "criterion": config.tuning.criterion,
                "best": best.params,
                "top_s": best.top_s,
                "score": best.score,
                "points": outcome.points,
            });
            emit(opts.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&value)?))
        }
    }
}

fn load_config(opts: &GlobalOpts) -> Result<ExperimentConfig> {
    let mut config = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            serde_json::from_str(&text)?
        }
        None if opts.full_scale => ExperimentConfig::full_scale(),
        None => ExperimentConfig::desk(),
    };
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn apply_data(config: &mut ExperimentConfig, args: DataArgs) {
    if let Some(matrix) = args.data {
        config.data = DataSource::Files {
            matrix,
            has_header: args.header,
            labels: args.labels,
            true_features: None,
            clusters: args.clusters,
        };
    } else if let (Some(c), DataSource::Synthetic(spec)) = (args.clusters, &mut config.data) {
        spec.clusters = c;
    }
}

fn check_features(features: Vec<usize>, d: usize) -> Result<Vec<usize>> {
    match features.iter().find(|&&j| j >= d) {
        Some(&j) => Err(Error::OutOfRange { what: "feature index", value: (j + 1).to_string(), range: format!("[1, {d}]") }),
        None => Ok(features),
    }
}

fn cluster(config: &ExperimentConfig, data: &PreparedData, features: &[usize]) -> Result<golfs::harness::Evaluation> {
    evaluate_subset(&data.x, features, data.labels.as_ref(), data.clusters, &config.kmeans, config.kmeans_seed(0))
}

fn output_path(path: &Path) -> Result<PathBuf> {
    let path = match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io { path: parent.to_path_buf(), source: e })?;
    }
    Ok(path)
}

/// `data.csv` -> `data.labels.txt`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            let path = output_path(path)?;
            std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io { path: PathBuf::from("<stdout>"), source: e })
        }
    }
}
