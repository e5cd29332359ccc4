use golfs::baselines::MethodId;
use golfs::harness::{ExperimentReport, MethodReport, RepeatRecord};
use golfs::ingest::*;
use golfs::{ClusterLabels, DenseMatrix};
use nalgebra::dmatrix;
use std::time::Duration;

#[test]
fn matrix_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let x = dmatrix![0.1, -2.5e-300, 1.0 / 3.0; 7.0, f64::MAX, -0.0];
    save_matrix(&path, &x).unwrap();
    assert_eq!(load_matrix(&path, false).unwrap(), x);
}

#[test]
fn labels_and_features_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let labels = ClusterLabels::from_ids(vec![0, 2, 1, 1]);
    save_labels(dir.path().join("y.txt"), &labels).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("y.txt")).unwrap().lines().next(), Some("1"));
    assert_eq!(load_labels(dir.path().join("y.txt")).unwrap(), labels);
    save_feature_list(dir.path().join("f.txt"), &[4, 0, 9]).unwrap();
    assert_eq!(load_feature_list(dir.path().join("f.txt")).unwrap(), vec![4, 0, 9]);
}

#[test]
fn ragged_and_missing_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "1,2\n3\n").unwrap();
    match load_matrix(&path, false) {
        Err(golfs::Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(load_matrix(dir.path().join("none.csv"), false), Err(golfs::Error::Io { .. })));
}

#[test]
fn tfidf_ignores_document_length() {
    let counts = dmatrix![1.0, 0.0, 2.0, 0.0; 0.0, 3.0, 1.0, 0.0; 2.0, 2.0, 0.0, 0.0];
    let doubled = DenseMatrix::from_fn(3, 4, |i, j| counts[(i, j)] * if i == 1 { 5.0 } else { 1.0 });
    let a = tfidf(&TokenCountMatrix::new(counts).unwrap());
    let b = tfidf(&TokenCountMatrix::new(doubled).unwrap());
    assert_eq!(a.kept_terms, vec![0, 1, 2]);
    assert!((a.matrix.clone() - b.matrix).abs().max() < 1e-15);
    assert!((a.matrix[(0, 0)] - (1.0 / 3.0) * (1.5f64).ln()).abs() < 1e-15);
    assert!(TokenCountMatrix::new(dmatrix![0.5]).is_err());
}

fn record(repeat: usize, acc: f64) -> RepeatRecord {
    serde_json::from_value(serde_json::json!({
        "repeat": repeat,
        "seed": repeat,
        "metrics": {"acc": acc, "nmi": acc / 2.0, "ari": 0.1},
        "selection": {"s_values": [2], "tp": [1.0], "cp": [0.0]},
    }))
    .unwrap()
}

fn sample_report() -> ExperimentReport {
    ExperimentReport {
        experiment: "t".into(),
        seed: 0,
        s_values: vec![2],
        methods: vec![
            MethodReport::from_repeats(MethodId::Golfs, vec![record(0, 0.8), record(1, 0.6)]),
            MethodReport::from_repeats(MethodId::Benchmark, vec![record(0, 0.5)]),
        ],
        runtime: Duration::from_secs(3),
    }
}

#[test]
fn csv_report_has_one_row_per_method() {
    let text = report_csv(&sample_report()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,TP(2),CP(2),NMI,ACC,ARI");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("GOLFS,1.0000 (0.0000),0.0000 (0.0000),0.3500 (0.0707),0.7000 (0.1414)"));
    assert!(lines[2].starts_with("BENCHMARK,1.0000,0.0000,0.2500,0.5000"));
}

#[test]
fn empty_report_is_header_only() {
    let report = ExperimentReport { methods: vec![], ..sample_report() };
    assert_eq!(report_csv(&report).unwrap(), "method,TP(2),CP(2),NMI,ACC,ARI\n");
}

#[test]
fn json_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let report = sample_report();
    save_report(&report, &path, ReportFormat::Json).unwrap();
    let back = load_report(&path).unwrap();
    assert_eq!(back.methods, report.methods);
    assert_eq!(report_json(&back).unwrap(), std::fs::read_to_string(&path).unwrap());
    assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
    assert!("xml".parse::<ReportFormat>().is_err());
}
