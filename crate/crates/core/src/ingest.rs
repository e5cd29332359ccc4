//! Reading and writing matrices, labels, feature lists and reports, plus a
//! TF-IDF transform for token counts.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{ExperimentReport, Summary};
use crate::labels::ClusterLabels;
use crate::numcore::DenseMatrix;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Loads a comma-separated matrix, one sample per line.
pub fn load_matrix(path: impl AsRef<Path>, has_header: bool) -> Result<DenseMatrix> {
    let path = path.as_ref();
    parse_matrix(open(path)?, has_header, path)
}

/// Parses matrix CSV from any reader; `path` only labels errors.
pub fn parse_matrix(reader: impl Read, has_header: bool, path: &Path) -> Result<DenseMatrix> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in csv.records() {
        let record = record.map_err(|e| Error::Format { path: path.into(), message: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                column: j + 1,
                message: format!("cannot parse `{cell}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { path: path.into(), line, column: j + 1, message: "non-finite value".into() });
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::Format { path: path.into(), message: "no data rows".into() })?;
    Ok(DenseMatrix::from_row_slice(rows, width, &values))
}

/// Writes one line per row with 17 significant digits, so reading the file
/// back reproduces every value exactly.
pub fn save_matrix(path: impl AsRef<Path>, x: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    write_matrix(&mut out, x).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix(out: &mut impl Write, x: &DenseMatrix) -> std::io::Result<()> {
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

fn read_integers(path: &Path, what: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let v: usize = text.parse().map_err(|_| Error::Parse {
            path: path.into(),
            line: i as u64 + 1,
            column: 1,
            message: format!("expected a positive integer {what}, found `{text}`"),
        })?;
        if v == 0 {
            return Err(Error::Parse {
                path: path.into(),
                line: i as u64 + 1,
                column: 1,
                message: format!("{what}s are one-based"),
            });
        }
        out.push(v - 1);
    }
    Ok(out)
}

fn write_integers(path: &Path, values: impl Iterator<Item = usize>) -> Result<()> {
    let mut out = create(path)?;
    for v in values {
        writeln!(out, "{}", v + 1).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads one one-based cluster id per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<ClusterLabels> {
    Ok(ClusterLabels::from_ids(read_integers(path.as_ref(), "cluster id")?))
}

pub fn save_labels(path: impl AsRef<Path>, labels: &ClusterLabels) -> Result<()> {
    write_integers(path.as_ref(), labels.ids().iter().copied())
}

/// Reads one one-based feature index per line.
pub fn load_feature_list(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    read_integers(path.as_ref(), "feature index")
}

pub fn save_feature_list(path: impl AsRef<Path>, features: &[usize]) -> Result<()> {
    write_integers(path.as_ref(), features.iter().copied())
}

/// Document-by-term counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenCountMatrix {
    counts: DenseMatrix,
}

impl TokenCountMatrix {
    /// Accepts nonnegative whole numbers with at least one nonzero per
    /// document.
    pub fn new(counts: DenseMatrix) -> Result<Self> {
        if let Some(v) = counts.iter().find(|v| !(**v >= 0.0 && v.fract() == 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("token counts must be nonnegative integers, found {v}")));
        }
        if let Some(doc) = counts.row_iter().position(|r| r.sum() == 0.0) {
            return Err(Error::InvalidConfig(format!("document {} has no tokens", doc + 1)));
        }
        Ok(TokenCountMatrix { counts })
    }

    pub fn docs(&self) -> usize {
        self.counts.nrows()
    }

    pub fn terms(&self) -> usize {
        self.counts.ncols()
    }

    pub fn counts(&self) -> &DenseMatrix {
        &self.counts
    }
}

#[derive(Debug, Clone)]
pub struct Tfidf {
    pub matrix: DenseMatrix,
    /// Original column index of every output column.
    pub kept_terms: Vec<usize>,
}

/// `tf(t, doc) * ln(n / df(t))` with `tf` the share of the document's
/// tokens. Terms that occur in no document are dropped.
pub fn tfidf(counts: &TokenCountMatrix) -> Tfidf {
    let c = counts.counts();
    let n = c.nrows();
    let totals: Vec<f64> = c.row_iter().map(|r| r.sum()).collect();
    let mut kept_terms = Vec::new();
    let mut idf = Vec::new();
    for (t, col) in c.column_iter().enumerate() {
        let df = col.iter().filter(|v| **v > 0.0).count();
        if df == 0 {
            log::warn!("term {} occurs in no document; dropped", t + 1);
            continue;
        }
        kept_terms.push(t);
        idf.push((n as f64 / df as f64).ln());
    }
    let matrix = DenseMatrix::from_fn(n, kept_terms.len(), |i, k| c[(i, kept_terms[k])] / totals[i] * idf[k]);
    Tfidf { matrix, kept_terms }
}

/// Output format for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown report format `{other}`"))),
        }
    }
}

fn cell(s: Option<Summary>) -> String {
    match s {
        None => String::new(),
        Some(Summary { mean, sd: None }) => format!("{mean:.4}"),
        Some(Summary { mean, sd: Some(sd) }) => format!("{mean:.4} ({sd:.4})"),
    }
}

/// One row per method: TP and CP at every `s`, then NMI, ACC and ARI as
/// `mean (sd)` with four decimals.
pub fn report_csv(report: &ExperimentReport) -> Result<String> {
    let mut header = vec!["method".to_string()];
    for s in &report.s_values {
        header.push(format!("TP({s})"));
        header.push(format!("CP({s})"));
    }
    header.extend(["NMI", "ACC", "ARI"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(csv_err)?;
    for m in &report.methods {
        let mut row = vec![m.name.to_string()];
        for s in &report.s_values {
            let at = m
                .selection
                .as_ref()
                .and_then(|sel| sel.s_values.iter().position(|v| v == s).map(|j| (sel.tp[j], sel.cp[j])));
            row.push(cell(at.map(|p| p.0)));
            row.push(cell(at.map(|p| p.1)));
        }
        for key in ["nmi", "acc", "ari"] {
            row.push(cell(m.metric(key)));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("csv writer: {e}"))
}

pub fn report_json(report: &ExperimentReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn save_report(report: &ExperimentReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Csv => report_csv(report)?,
        ReportFormat::Json => report_json(report)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}
