//! Python bindings for the `logvuln` pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use logvuln::classify::{self, ClassifierConfig, ClassifierKind, EvalProtocol, TrainedModel};
use logvuln::features::{self, DistanceFormula, TimedPoint};
use logvuln::ground_truth::{self, DEFAULT_KEYWORD, DEFAULT_TIMEOUT_S};
use logvuln::ingest::{self, IngestOptions, ParsedLine};
use logvuln::pipeline::{self, PipelineConfig};
use logvuln::synth::{self, CorpusSpec};
use logvuln::tsne::{self, TsneConfig};
use logvuln::Error;

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e {
        Error::Io { .. } | Error::MissingArtifact(_) => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn kind(name: &str) -> PyResult<ClassifierKind> {
    name.parse().map_err(to_py)
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "logvuln_py")]
#[derive(Clone)]
struct LogRecord {
    timestamp_ms: u32,
    layer: String,
    level: String,
    subframe: Option<u32>,
    channel: Option<String>,
    content: String,
}

#[pymethods]
impl LogRecord {
    fn __repr__(&self) -> String {
        format!(
            "LogRecord(timestamp_ms={}, layer={:?}, level={:?}, content={:?})",
            self.timestamp_ms, self.layer, self.level, self.content
        )
    }
}

impl From<&ingest::LogRecord> for LogRecord {
    fn from(r: &ingest::LogRecord) -> Self {
        LogRecord {
            timestamp_ms: r.timestamp_ms,
            layer: r.layer.clone(),
            level: r.level.to_string(),
            subframe: r.subframe,
            channel: r.channel.clone(),
            content: r.content.clone(),
        }
    }
}

/// A parsed log file. `groups` holds `(timestamp_ms, elapsed_s, text)`.
#[pyclass(frozen, get_all, module = "logvuln_py")]
struct Document {
    source_path: String,
    records: Vec<LogRecord>,
    groups: Vec<(u32, u64, String)>,
    label: u8,
    duration_s: Option<u64>,
}

#[pyfunction]
fn parse_line(line: &str) -> Option<LogRecord> {
    match ingest::parse_line(line) {
        ParsedLine::Record(r) => Some(LogRecord::from(&r)),
        ParsedLine::Skip => None,
    }
}

#[pyfunction]
fn normalize_content(content: &str) -> String {
    ingest::normalize_content(content)
}

/// Parse a log file and label it by keyword.
#[pyfunction]
#[pyo3(signature = (path, keyword = DEFAULT_KEYWORD, timeout_s = DEFAULT_TIMEOUT_S, exclude_keyword = false))]
fn parse_file(path: PathBuf, keyword: &str, timeout_s: u64, exclude_keyword: bool) -> PyResult<Document> {
    let opts = IngestOptions {
        exclude_from_groups: exclude_keyword.then(|| keyword.to_string()),
        ..IngestOptions::default()
    };
    let doc = ingest::parse_file_with(&path, &opts).map_err(to_py)?;
    let outcome = ground_truth::label_outcome(&doc, keyword, timeout_s);
    Ok(Document {
        source_path: doc.source_path.clone(),
        records: doc.records.iter().map(LogRecord::from).collect(),
        groups: doc.groups.into_iter().map(|g| (g.timestamp_ms, g.elapsed_s, g.text)).collect(),
        label: outcome.label,
        duration_s: outcome.duration_s,
    })
}

#[pyfunction]
fn hash_embed(text: &str) -> Vec<f64> {
    logvuln::embed::hash_embed(text)
}

/// Project rows of `x` to 2-D. Returns `(coords, kl_trace)`.
#[pyfunction]
#[pyo3(signature = (x, perplexity = 30.0, iters = 1000, eta = 200.0, seed = 0))]
fn tsne_fit(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    perplexity: f64,
    iters: usize,
    eta: f64,
    seed: u64,
) -> PyResult<(Vec<[f64; 2]>, Vec<f64>)> {
    let cfg = TsneConfig {
        perplexity,
        iters,
        eta,
        seed,
        ..TsneConfig::default()
    };
    let proj = py.detach(|| tsne::fit(&x, &cfg)).map_err(to_py)?;
    Ok((proj.y, proj.kl_trace))
}

#[pyfunction]
fn centroid_distance(points: Vec<[f64; 2]>) -> PyResult<f64> {
    if points.is_empty() {
        return Err(PyValueError::new_err("centroid of an empty bin"));
    }
    Ok(features::centroid_distance(&points))
}

/// Feature vector from `(elapsed_s, y1, y2)` points: 38 distances, then
/// 38 presence flags when `with_masks`.
#[pyfunction]
#[pyo3(signature = (points, with_masks = true, horizon_s = None))]
fn featurize(points: Vec<(u64, f64, f64)>, with_masks: bool, horizon_s: Option<u64>) -> Vec<f64> {
    let pts: Vec<TimedPoint> = points
        .into_iter()
        .map(|(s, a, b)| TimedPoint { elapsed_s: s, y: [a, b] })
        .collect();
    let mut fv = features::featurize("", &pts, 0, None, DistanceFormula::Norm);
    if let Some(h) = horizon_s {
        fv = features::truncate_to_window(&fv, h);
    }
    fv.to_inputs(with_masks)
}

/// `(auc, [(fpr, tpr), ...])`.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<(f64, Vec<(f64, f64)>)> {
    if scores.len() != labels.len() {
        return Err(PyValueError::new_err("scores and labels differ in length"));
    }
    let roc = classify::roc_auc(&scores, &labels).map_err(to_py)?;
    Ok((roc.auc, roc.points))
}

#[pyfunction]
#[pyo3(signature = (path, keyword = DEFAULT_KEYWORD, timeout_s = DEFAULT_TIMEOUT_S))]
fn label_outcome(path: PathBuf, keyword: &str, timeout_s: u64) -> PyResult<(u8, Option<u64>)> {
    let doc = ingest::parse_file(&path).map_err(to_py)?;
    let l = ground_truth::label_outcome(&doc, keyword, timeout_s);
    Ok((l.label, l.duration_s))
}

/// A trained classifier: `logreg`, `knn` or `forest`.
#[pyclass(module = "logvuln_py")]
struct Classifier {
    model: TrainedModel,
}

#[pymethods]
impl Classifier {
    #[new]
    #[pyo3(signature = (kind, x, y, seed = 7, k = 5, trees = 100))]
    fn new(py: Python<'_>, kind: &str, x: Vec<Vec<f64>>, y: Vec<u8>, seed: u64, k: usize, trees: usize) -> PyResult<Self> {
        let kind = self::kind(kind)?;
        let cfg = ClassifierConfig {
            knn_k: k,
            forest_trees: trees,
            ..ClassifierConfig::default()
        };
        let model = py.detach(|| classify::fit(kind, &x, &y, &cfg, seed)).map_err(to_py)?;
        Ok(Classifier { model })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.model.kind.name()
    }

    fn predict_scores(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.model.predict_scores(&x).map_err(to_py)
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<u8>> {
        self.model.predict(&x).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.model.to_json()
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Classifier {
            model: TrainedModel::from_json(s).map_err(to_py)?,
        })
    }
}

/// Stratified k-fold cross-validation. Returns `(accuracy, auc)`.
#[pyfunction]
#[pyo3(signature = (kind, x, y, folds = 5, seed = 7))]
fn cross_validate(py: Python<'_>, kind: &str, x: Vec<Vec<f64>>, y: Vec<u8>, folds: usize, seed: u64) -> PyResult<(f64, f64)> {
    let kind = self::kind(kind)?;
    let rep = py
        .detach(|| {
            classify::evaluate(kind, &x, &y, EvalProtocol::CrossValidation { folds }, seed, &ClassifierConfig::default())
        })
        .map_err(to_py)?;
    Ok((rep.accuracy, rep.auc))
}

/// Write a synthetic corpus; returns `(source_path, label, duration_s)` rows.
#[pyfunction]
#[pyo3(signature = (out_dir, n_files = 200, seed = 7, window = (10, 17), duration_s = 45, late_keyword_fraction = 0.0))]
fn generate_corpus(
    out_dir: PathBuf,
    n_files: usize,
    seed: u64,
    window: (u64, u64),
    duration_s: u64,
    late_keyword_fraction: f64,
) -> PyResult<Vec<(String, u8, Option<u64>)>> {
    let spec = CorpusSpec {
        n_files,
        seed,
        divergence_window_s: window,
        duration_s: (duration_s, duration_s),
        late_keyword_fraction,
        ..CorpusSpec::default()
    };
    let rows = synth::generate_corpus(&spec, &out_dir).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.source_path, r.label, r.duration_s)).collect())
}

/// Run every pipeline stage; returns the text summary.
#[pyfunction]
#[pyo3(signature = (inputs, out_dir, seed = 7, iters = 1000, folds = 5, exclude_keyword = false, verbose = false))]
fn run_all(
    py: Python<'_>,
    inputs: Vec<String>,
    out_dir: PathBuf,
    seed: u64,
    iters: usize,
    folds: usize,
    exclude_keyword: bool,
    verbose: bool,
) -> PyResult<String> {
    let mut cfg = PipelineConfig {
        input: inputs,
        out: out_dir,
        seed,
        exclude_keyword,
        protocol: EvalProtocol::CrossValidation { folds },
        verbosity: u8::from(verbose),
        ..PipelineConfig::default()
    };
    cfg.tsne.iters = iters;
    py.detach(|| pipeline::run_all(&cfg)).map_err(to_py)
}

#[pymodule]
fn logvuln_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_KEYWORD", DEFAULT_KEYWORD)?;
    m.add("N_BINS", features::N_BINS)?;
    m.add_class::<LogRecord>()?;
    m.add_class::<Document>()?;
    m.add_class::<Classifier>()?;
    m.add_function(wrap_pyfunction!(parse_line, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_content, m)?)?;
    m.add_function(wrap_pyfunction!(parse_file, m)?)?;
    m.add_function(wrap_pyfunction!(label_outcome, m)?)?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(tsne_fit, m)?)?;
    m.add_function(wrap_pyfunction!(centroid_distance, m)?)?;
    m.add_function(wrap_pyfunction!(featurize, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    Ok(())
}
