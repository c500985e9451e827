//! Staged pipeline over on-disk artifacts.
//!
//! Every stage reads the artifact of the stage before it from the output
//! directory and writes its own:
//!
//! | stage     | reads                       | writes                         |
//! |-----------|-----------------------------|--------------------------------|
//! | parse     | input logs                  | `groups.jsonl`                 |
//! | label     | input logs                  | `labels.csv`                   |
//! | embed     | `groups.jsonl`              | `embeddings.bin`               |
//! | reduce    | `embeddings.bin`            | `projection.csv`, `kl_trace.csv` |
//! | featurize | `projection.csv`, `labels.csv` | `features.csv`              |
//! | train     | `features.csv`              | `models/<kind>.json`           |
//! | evaluate  | `features.csv`              | `report.json`, `roc_<kind>.csv` |
//! | sweep     | `features.csv`              | `sweep.csv`                    |

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::classify::{self, ClassifierConfig, ClassifierKind, EvalProtocol, EvalReport};
use crate::embed::{self, EmbedderSpec, GroupRef, SentenceVector, EMBED_DIM};
use crate::error::{Error, Result};
use crate::features::{self, bin_labels, DistanceFormula, FeatureVector, TimedPoint, N_BINS};
use crate::ground_truth::{self, read_manifest, write_manifest, ManifestRow, DEFAULT_KEYWORD, DEFAULT_TIMEOUT_S};
use crate::ingest::{self, EventGroup, GroupingMode, IngestOptions};
use crate::tsne::{self, TsneConfig};

pub const GROUPS_FILE: &str = "groups.jsonl";
pub const LABELS_FILE: &str = "labels.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const PROJECTION_FILE: &str = "projection.csv";
pub const KL_TRACE_FILE: &str = "kl_trace.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const MODELS_DIR: &str = "models";
pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.csv";

const EMBEDDINGS_MAGIC: &[u8; 8] = b"LVEMB\0\0\x01";

/// Everything the pipeline needs; mirrors the CLI flags one to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: Vec<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub keyword: String,
    pub timeout_s: u64,
    pub grouping: GroupingMode,
    /// Drop records containing the keyword before grouping.
    pub exclude_keyword: bool,
    pub embedder: EmbedderSpec,
    pub tsne: TsneConfig,
    pub use_masks: bool,
    pub compat_distance: bool,
    pub classifiers: Vec<ClassifierKind>,
    pub classifier: ClassifierConfig,
    pub protocol: EvalProtocol,
    pub horizons: Vec<u64>,
    pub workers: Option<usize>,
    pub verbosity: u8,
}

/// Every bin label: 0, 4, 5, ..., 40.
pub fn default_horizons() -> Vec<u64> {
    bin_labels().to_vec()
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: Vec::new(),
            out: PathBuf::from("out"),
            seed: 7,
            keyword: DEFAULT_KEYWORD.into(),
            timeout_s: DEFAULT_TIMEOUT_S,
            grouping: GroupingMode::Millisecond,
            exclude_keyword: false,
            embedder: EmbedderSpec::default(),
            tsne: TsneConfig::default(),
            use_masks: true,
            compat_distance: false,
            classifiers: ClassifierKind::ALL.to_vec(),
            classifier: ClassifierConfig::default(),
            protocol: EvalProtocol::default(),
            horizons: default_horizons(),
            workers: None,
            verbosity: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.keyword.is_empty() {
            return Err(Error::Config("keyword must be nonempty".into()));
        }
        if self.timeout_s == 0 {
            return Err(Error::Config("timeout must be positive".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("no classifier selected".into()));
        }
        if let EvalProtocol::CrossValidation { folds } = self.protocol {
            if folds < 2 {
                return Err(Error::Config("need at least 2 folds".into()));
            }
        }
        if let Some(h) = self.horizons.iter().find(|&&h| h > 40) {
            return Err(Error::Config(format!("horizon {h} outside [0, 40]")));
        }
        self.embedder.validate()?;
        self.tsne.validate()?;
        self.classifier.validate()
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            grouping: self.grouping,
            exclude_from_groups: self.exclude_keyword.then(|| self.keyword.clone()),
        }
    }

    pub fn distance_formula(&self) -> DistanceFormula {
        if self.compat_distance {
            DistanceFormula::CompatSum
        } else {
            DistanceFormula::Norm
        }
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn progress(&self, stage: &str, file: &str, items: usize) {
        if self.verbosity > 0 {
            eprintln!(
                "{}",
                serde_json::json!({ "stage": stage, "file": file, "status": "ok", "items": items })
            );
        }
    }

    /// Run `f` on the configured worker pool.
    fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.workers {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Expand inputs: directories contribute their `*.log` files, other entries
/// are treated as glob patterns (a plain path is its own pattern). The
/// result is sorted and deduplicated.
pub fn resolve_inputs(inputs: &[String]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for input in inputs {
        let p = Path::new(input);
        if p.is_dir() {
            let rd = fs::read_dir(p).map_err(|e| Error::io(p, e))?;
            for entry in rd {
                let path = entry.map_err(|e| Error::io(p, e))?.path();
                if path.extension().is_some_and(|e| e == "log") {
                    paths.push(path);
                }
            }
        } else {
            let matches = glob::glob(input).map_err(|e| Error::Config(format!("bad pattern {input}: {e}")))?;
            let before = paths.len();
            paths.extend(matches.filter_map(|m| m.ok()));
            if paths.len() == before {
                return Err(Error::Config(format!("no input matches {input}")));
            }
        }
    }
    paths.sort();
    paths.dedup();
    if paths.is_empty() {
        return Err(Error::Config("no input files".into()));
    }
    Ok(paths)
}

fn create_out(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- parse

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLine {
    pub source_path: String,
    pub timestamp_ms: u32,
    pub elapsed_s: u64,
    pub text: String,
}

fn parse_inputs(cfg: &PipelineConfig, stage: &str) -> Result<Vec<ingest::ProfilingDocument>> {
    let paths = resolve_inputs(&cfg.input)?;
    let opts = cfg.ingest_options();
    let docs: Vec<Result<ingest::ProfilingDocument>> =
        cfg.in_pool(|| paths.par_iter().map(|p| ingest::parse_file_with(p, &opts)).collect())?;
    let docs = docs.into_iter().collect::<Result<Vec<_>>>()?;
    for d in &docs {
        cfg.progress(stage, &d.source_path, d.groups.len());
    }
    Ok(docs)
}

pub fn stage_parse(cfg: &PipelineConfig) -> Result<usize> {
    let docs = parse_inputs(cfg, "parse")?;
    create_out(cfg)?;
    let path = cfg.artifact(GROUPS_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    let mut n = 0;
    for d in &docs {
        for g in &d.groups {
            let line = GroupLine {
                source_path: d.source_path.clone(),
                timestamp_ms: g.timestamp_ms,
                elapsed_s: g.elapsed_s,
                text: g.text.clone(),
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| Error::artifact(&path, e))?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
            n += 1;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(n)
}

/// Groups per source file, in file order.
pub fn read_groups(path: &Path) -> Result<Vec<(String, Vec<EventGroup>)>> {
    require(path)?;
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<(String, Vec<EventGroup>)> = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let g: GroupLine = serde_json::from_str(&line).map_err(|e| Error::artifact(path, e))?;
        let group = EventGroup {
            timestamp_ms: g.timestamp_ms,
            elapsed_s: g.elapsed_s,
            text: g.text,
            record_count: 0,
        };
        match out.last_mut() {
            Some((src, v)) if *src == g.source_path => v.push(group),
            _ => out.push((g.source_path, vec![group])),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- label

pub fn stage_label(cfg: &PipelineConfig) -> Result<Vec<ManifestRow>> {
    // labels come from raw content, so keyword records are never excluded here
    let raw_cfg = PipelineConfig {
        exclude_keyword: false,
        ..cfg.clone()
    };
    let docs = parse_inputs(&raw_cfg, "label")?;
    create_out(cfg)?;
    let rows: Vec<ManifestRow> = docs
        .iter()
        .map(|d| {
            let l = ground_truth::label_outcome(d, &cfg.keyword, cfg.timeout_s);
            ManifestRow {
                source_path: d.source_path.clone(),
                label: l.label,
                duration_s: l.duration_s,
            }
        })
        .collect();
    write_manifest(&cfg.artifact(LABELS_FILE), &rows)?;
    Ok(rows)
}

// ---------------------------------------------------------------- embed

/// Write sentence vectors in the sparse little-endian sidecar format:
/// magic, u32 dimension, u64 rows, then per row: u32 path length, path
/// bytes, u32 timestamp_ms, u64 elapsed_s, u32 nonzero count and that many
/// (u16 index, f64 value) pairs.
pub fn write_embeddings(path: &Path, vectors: &[SentenceVector]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(EMBEDDINGS_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(EMBED_DIM as u32).map_err(io)?;
    w.write_u64::<LittleEndian>(vectors.len() as u64).map_err(io)?;
    for v in vectors {
        let src = v.group_ref.source_path.as_bytes();
        w.write_u32::<LittleEndian>(src.len() as u32).map_err(io)?;
        w.write_all(src).map_err(io)?;
        w.write_u32::<LittleEndian>(v.group_ref.timestamp_ms).map_err(io)?;
        w.write_u64::<LittleEndian>(v.group_ref.elapsed_s).map_err(io)?;
        let nz: Vec<(usize, f64)> = v.values.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        w.write_u32::<LittleEndian>(nz.len() as u32).map_err(io)?;
        for (i, x) in nz {
            w.write_u16::<LittleEndian>(i as u16).map_err(io)?;
            w.write_f64::<LittleEndian>(x).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_embeddings(path: &Path) -> Result<Vec<SentenceVector>> {
    require(path)?;
    let bad = |r: &str| Error::artifact(path, r);
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut r = bytes.as_slice();
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != EMBEDDINGS_MAGIC {
        return Err(bad("not an embeddings file"));
    }
    let trunc = |_| bad("truncated");
    let dim = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    if dim != EMBED_DIM {
        return Err(Error::DimensionMismatch { expected: EMBED_DIM, got: dim });
    }
    let rows = r.read_u64::<LittleEndian>().map_err(trunc)?;
    let mut out = Vec::with_capacity(rows as usize);
    for _ in 0..rows {
        let len = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
        if r.len() < len {
            return Err(bad("truncated"));
        }
        let (src, rest) = r.split_at(len);
        r = rest;
        let source_path = String::from_utf8(src.to_vec()).map_err(|_| bad("non-utf8 path"))?;
        let timestamp_ms = r.read_u32::<LittleEndian>().map_err(trunc)?;
        let elapsed_s = r.read_u64::<LittleEndian>().map_err(trunc)?;
        let nnz = r.read_u32::<LittleEndian>().map_err(trunc)?;
        let mut values = vec![0.0; EMBED_DIM];
        for _ in 0..nnz {
            let i = r.read_u16::<LittleEndian>().map_err(trunc)? as usize;
            let x = r.read_f64::<LittleEndian>().map_err(trunc)?;
            *values.get_mut(i).ok_or_else(|| bad("index out of range"))? = x;
        }
        out.push(SentenceVector {
            values,
            group_ref: GroupRef {
                source_path,
                timestamp_ms,
                elapsed_s,
            },
        });
    }
    Ok(out)
}

pub fn stage_embed(cfg: &PipelineConfig) -> Result<usize> {
    cfg.embedder.validate()?;
    let files = read_groups(&cfg.artifact(GROUPS_FILE))?;
    let per_file: Vec<Result<Vec<SentenceVector>>> = cfg.in_pool(|| {
        files
            .par_iter()
            .map(|(src, groups)| {
                let texts: Vec<String> = groups.iter().map(|g| g.text.clone()).collect();
                let vecs = embed::embed_texts(&cfg.embedder, &texts)?;
                Ok(groups
                    .iter()
                    .zip(vecs)
                    .map(|(g, values)| SentenceVector {
                        values,
                        group_ref: GroupRef {
                            source_path: src.clone(),
                            timestamp_ms: g.timestamp_ms,
                            elapsed_s: g.elapsed_s,
                        },
                    })
                    .collect())
            })
            .collect()
    })?;
    let mut all = Vec::new();
    for ((src, _), r) in files.iter().zip(per_file) {
        let v = r?;
        cfg.progress("embed", src, v.len());
        all.extend(v);
    }
    write_embeddings(&cfg.artifact(EMBEDDINGS_FILE), &all)?;
    Ok(all.len())
}

// ---------------------------------------------------------------- reduce

/// One projected event group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub source_path: String,
    pub timestamp_ms: u32,
    pub elapsed_s: u64,
    pub y1: f64,
    pub y2: f64,
}

/// t-SNE seed for one file, derived from the run seed and the path.
/// Seeded by file name only, so a corpus projects identically wherever it lives.
pub fn file_seed(seed: u64, source_path: &str) -> u64 {
    let name = Path::new(source_path).file_name().map_or(source_path.into(), |n| n.to_string_lossy());
    XxHash64::oneshot(seed, name.as_bytes())
}

fn split_by_source(vectors: Vec<SentenceVector>) -> Vec<(String, Vec<SentenceVector>)> {
    let mut out: Vec<(String, Vec<SentenceVector>)> = Vec::new();
    for v in vectors {
        match out.last_mut() {
            Some((src, list)) if *src == v.group_ref.source_path => list.push(v),
            _ => out.push((v.group_ref.source_path.clone(), vec![v])),
        }
    }
    out
}

/// Project one file's vectors. Files with fewer than three points cannot
/// be embedded and are placed at the origin.
pub fn reduce_file(source_path: &str, vectors: &[SentenceVector], cfg: &TsneConfig, seed: u64) -> Result<(Vec<ProjectedPoint>, Vec<f64>)> {
    let x: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
    let (coords, trace) = if x.len() < 3 {
        (vec![[0.0, 0.0]; x.len()], Vec::new())
    } else {
        let file_cfg = TsneConfig {
            seed: file_seed(seed, source_path),
            ..cfg.clone()
        };
        let proj = tsne::fit(&x, &file_cfg)?;
        (proj.y, proj.kl_trace)
    };
    let points = vectors
        .iter()
        .zip(coords)
        .map(|(v, y)| ProjectedPoint {
            source_path: source_path.to_string(),
            timestamp_ms: v.group_ref.timestamp_ms,
            elapsed_s: v.group_ref.elapsed_s,
            y1: y[0],
            y2: y[1],
        })
        .collect();
    Ok((points, trace))
}

pub fn stage_reduce(cfg: &PipelineConfig) -> Result<usize> {
    cfg.tsne.validate()?;
    let files = split_by_source(read_embeddings(&cfg.artifact(EMBEDDINGS_FILE))?);
    let results: Vec<Result<(Vec<ProjectedPoint>, Vec<f64>)>> = cfg.in_pool(|| {
        files
            .par_iter()
            .map(|(src, vecs)| reduce_file(src, vecs, &cfg.tsne, cfg.seed))
            .collect()
    })?;
    let proj_path = cfg.artifact(PROJECTION_FILE);
    let kl_path = cfg.artifact(KL_TRACE_FILE);
    let mut pw = csv::Writer::from_path(&proj_path).map_err(|e| Error::artifact(&proj_path, e))?;
    let mut kw = csv::Writer::from_path(&kl_path).map_err(|e| Error::artifact(&kl_path, e))?;
    kw.write_record(["source_path", "iteration", "kl"])
        .map_err(|e| Error::artifact(&kl_path, e))?;
    let mut n = 0;
    for ((src, _), r) in files.iter().zip(results) {
        let (points, trace) = r?;
        if points.len() < 3 && cfg.verbosity > 0 {
            eprintln!(
                "{}",
                serde_json::json!({ "stage": "reduce", "file": src, "status": "warning",
                    "reason": "fewer than 3 groups, placed at the origin" })
            );
        }
        cfg.progress("reduce", src, points.len());
        for p in &points {
            pw.serialize(p).map_err(|e| Error::artifact(&proj_path, e))?;
        }
        for (i, kl) in trace.iter().enumerate() {
            kw.write_record([src.as_str(), &i.to_string(), &kl.to_string()])
                .map_err(|e| Error::artifact(&kl_path, e))?;
        }
        n += points.len();
    }
    pw.flush().map_err(|e| Error::io(&proj_path, e))?;
    kw.flush().map_err(|e| Error::io(&kl_path, e))?;
    Ok(n)
}

pub fn read_projection(path: &Path) -> Result<Vec<ProjectedPoint>> {
    require(path)?;
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::artifact(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::artifact(path, e)))
        .collect()
}

// ---------------------------------------------------------------- featurize

fn feature_header() -> Vec<String> {
    let mut h = vec!["source_path".to_string(), "label".into(), "duration_s".into()];
    h.extend(bin_labels().iter().map(|b| format!("d{b}")));
    h.extend(bin_labels().iter().map(|b| format!("m{b}")));
    h
}

pub fn write_features(path: &Path, rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::artifact(path, e))?;
    w.write_record(feature_header()).map_err(|e| Error::artifact(path, e))?;
    for fv in rows {
        let mut rec = vec![
            fv.source_path.clone(),
            fv.label.to_string(),
            fv.duration_s.map(|d| d.to_string()).unwrap_or_default(),
        ];
        rec.extend(fv.distances.iter().map(|d| d.to_string()));
        rec.extend(fv.present.iter().map(|&m| u8::from(m).to_string()));
        w.write_record(&rec).map_err(|e| Error::artifact(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureVector>> {
    require(path)?;
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::artifact(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::artifact(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != feature_header() {
        return Err(Error::artifact(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::artifact(path, e))?;
        let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|e| Error::artifact(path, e)) };
        let mut distances = [0.0; N_BINS];
        let mut present = [false; N_BINS];
        for b in 0..N_BINS {
            distances[b] = num(3 + b)?;
            present[b] = &rec[3 + N_BINS + b] == "1";
        }
        out.push(FeatureVector {
            source_path: rec[0].to_string(),
            label: rec[1].parse().map_err(|e| Error::artifact(path, e))?,
            duration_s: if rec[2].is_empty() {
                None
            } else {
                Some(rec[2].parse().map_err(|e| Error::artifact(path, e))?)
            },
            distances,
            present,
        });
    }
    Ok(out)
}

pub fn stage_featurize(cfg: &PipelineConfig) -> Result<Vec<FeatureVector>> {
    let labels = read_manifest(&cfg.artifact(LABELS_FILE))?;
    let points = read_projection(&cfg.artifact(PROJECTION_FILE))?;
    let mut by_file: BTreeMap<&str, Vec<TimedPoint>> = BTreeMap::new();
    for p in &points {
        by_file.entry(&p.source_path).or_default().push(TimedPoint {
            elapsed_s: p.elapsed_s,
            y: [p.y1, p.y2],
        });
    }
    let formula = cfg.distance_formula();
    let rows: Vec<FeatureVector> = labels
        .iter()
        .map(|l| {
            let pts = by_file.get(l.source_path.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            cfg.progress("featurize", &l.source_path, pts.len());
            features::featurize(&l.source_path, pts, l.label, l.duration_s, formula)
        })
        .collect();
    write_features(&cfg.artifact(FEATURES_FILE), &rows)?;
    Ok(rows)
}

// ---------------------------------------------------------------- train / evaluate / sweep

fn matrix(rows: &[FeatureVector], with_masks: bool) -> (Vec<Vec<f64>>, Vec<u8>) {
    (
        rows.iter().map(|f| f.to_inputs(with_masks)).collect(),
        rows.iter().map(|f| f.label).collect(),
    )
}

pub fn stage_train(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let rows = read_features(&cfg.artifact(FEATURES_FILE))?;
    let (x, y) = matrix(&rows, cfg.use_masks);
    let dir = cfg.artifact(MODELS_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();
    for &kind in &cfg.classifiers {
        let model = classify::fit(kind, &x, &y, &cfg.classifier, cfg.seed)?;
        let path = dir.join(format!("{kind}.json"));
        write_text(&path, &model.to_json())?;
        written.push(path);
    }
    Ok(written)
}

pub fn stage_evaluate(cfg: &PipelineConfig) -> Result<Vec<EvalReport>> {
    let rows = read_features(&cfg.artifact(FEATURES_FILE))?;
    let (x, y) = matrix(&rows, cfg.use_masks);
    let mut reports = Vec::new();
    for &kind in &cfg.classifiers {
        let report = classify::evaluate(kind, &x, &y, cfg.protocol, cfg.seed, &cfg.classifier)?;
        let mut roc = String::from("fpr,tpr\n");
        for (f, t) in &report.roc_points {
            roc.push_str(&format!("{f},{t}\n"));
        }
        write_text(&cfg.artifact(&format!("roc_{kind}.csv")), &roc)?;
        reports.push(report);
    }
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    write_text(&cfg.artifact(REPORT_FILE), &json)?;
    Ok(reports)
}

/// Accuracy for every (classifier, horizon) pair.
pub fn stage_sweep(cfg: &PipelineConfig) -> Result<BTreeMap<ClassifierKind, BTreeMap<u64, f64>>> {
    let rows = read_features(&cfg.artifact(FEATURES_FILE))?;
    let mut out = BTreeMap::new();
    let mut csv = String::from("classifier,horizon_s,accuracy\n");
    for &kind in &cfg.classifiers {
        let acc = classify::accuracy_over_windows(
            kind,
            &rows,
            &cfg.horizons,
            cfg.protocol,
            cfg.seed,
            &cfg.classifier,
            cfg.use_masks,
        )?;
        for (h, a) in &acc {
            csv.push_str(&format!("{kind},{h},{a}\n"));
        }
        out.insert(kind, acc);
    }
    write_text(&cfg.artifact(SWEEP_FILE), &csv)?;
    Ok(out)
}

pub fn read_sweep(path: &Path) -> Result<BTreeMap<ClassifierKind, BTreeMap<u64, f64>>> {
    require(path)?;
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::artifact(path, e))?;
    let mut out: BTreeMap<ClassifierKind, BTreeMap<u64, f64>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::artifact(path, e))?;
        let kind: ClassifierKind = rec[0].parse()?;
        let h = rec[1].parse().map_err(|e| Error::artifact(path, e))?;
        let a = rec[2].parse().map_err(|e| Error::artifact(path, e))?;
        out.entry(kind).or_default().insert(h, a);
    }
    Ok(out)
}

// ---------------------------------------------------------------- report

/// Human-readable summary of the evaluation artifacts in `out_dir`. Also
/// writes `plot_roc.csv` and, when a sweep exists, `plot_sweep.csv`.
pub fn report(out_dir: &Path) -> Result<String> {
    let report_path = out_dir.join(REPORT_FILE);
    require(&report_path)?;
    let text = fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
    let reports: Vec<EvalReport> = serde_json::from_str(&text).map_err(|e| Error::artifact(&report_path, e))?;
    let sweep_path = out_dir.join(SWEEP_FILE);
    let sweep = if sweep_path.exists() { Some(read_sweep(&sweep_path)?) } else { None };
    let labels_path = out_dir.join(LABELS_FILE);
    let labels = if labels_path.exists() { Some(read_manifest(&labels_path)?) } else { None };

    let mut s = String::new();
    s.push_str("classifier  accuracy  auc     tp   fp   tn   fn\n");
    let mut roc_csv = String::from("classifier,fpr,tpr\n");
    for r in &reports {
        let c = r.confusion;
        s.push_str(&format!(
            "{:<10}  {:.4}    {:.4}  {:<4} {:<4} {:<4} {}\n",
            r.kind.name(),
            r.accuracy,
            r.auc,
            c.true_positive,
            c.false_positive,
            c.true_negative,
            c.false_negative
        ));
        for (f, t) in &r.roc_points {
            roc_csv.push_str(&format!("{},{f},{t}\n", r.kind));
        }
    }
    write_text(&out_dir.join("plot_roc.csv"), &roc_csv)?;

    if let Some(labels) = labels {
        let outcomes: Vec<ground_truth::OutcomeLabel> = labels
            .iter()
            .map(|l| ground_truth::OutcomeLabel {
                label: l.label,
                matched_at_ms: None,
                duration_s: l.duration_s,
            })
            .collect();
        let passed = labels.iter().filter(|l| l.label == 1).count();
        s.push_str(&format!("\nruns: {} ({} passed, {} failed)\n", labels.len(), passed, labels.len() - passed));
        s.push_str("setup duration histogram (5 s bins):\n");
        for (lo, count) in ground_truth::duration_histogram(&outcomes, 5) {
            s.push_str(&format!("  [{lo:>3}, {:>3}) {count}\n", lo + 5));
        }
    }

    if let Some(sweep) = sweep {
        let horizons: Vec<u64> = sweep.values().flat_map(|m| m.keys().copied()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        s.push_str("\naccuracy by horizon (s):\nhorizon");
        let mut plot = String::from("horizon_s");
        for k in sweep.keys() {
            s.push_str(&format!("  {:>8}", k.name()));
            plot.push_str(&format!(",{k}"));
        }
        s.push('\n');
        plot.push('\n');
        for h in horizons {
            s.push_str(&format!("{h:>7}"));
            plot.push_str(&h.to_string());
            for acc in sweep.values() {
                match acc.get(&h) {
                    Some(a) => {
                        s.push_str(&format!("  {a:>8.4}"));
                        plot.push_str(&format!(",{a}"));
                    }
                    None => {
                        s.push_str(&format!("  {:>8}", "-"));
                        plot.push(',');
                    }
                }
            }
            s.push('\n');
            plot.push('\n');
        }
        write_text(&out_dir.join("plot_sweep.csv"), &plot)?;
    }
    Ok(s)
}

/// Every stage in order, then the summary.
pub fn run_all(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    stage_parse(cfg)?;
    stage_label(cfg)?;
    stage_embed(cfg)?;
    stage_reduce(cfg)?;
    stage_featurize(cfg)?;
    stage_train(cfg)?;
    stage_evaluate(cfg)?;
    if !cfg.horizons.is_empty() {
        stage_sweep(cfg)?;
    }
    report(&cfg.out)
}
