//! Sentence embeddings for event-group text.
//!
//! Two backends sit behind [`EmbedderSpec`]: a deterministic feature-hashing
//! embedder over word unigrams and bigrams, and an HTTP client for an
//! external sentence-transformer service.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use crate::error::{Error, Result};
use crate::ingest::ProfilingDocument;

pub const EMBED_DIM: usize = 512;
/// Seed of the XXH64 hash used for n-gram bucketing.
pub const HASH_SEED: u64 = 2023;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Hashing,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub backend: Backend,
    pub remote_endpoint: Option<String>,
    pub dimension: usize,
    pub ngram_range: (usize, usize),
    pub timeout_s: u64,
    /// Sentences per remote request.
    pub batch_size: usize,
    /// Remote requests in flight at once.
    pub parallelism: usize,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec {
            backend: Backend::Hashing,
            remote_endpoint: None,
            dimension: EMBED_DIM,
            ngram_range: (1, 2),
            timeout_s: 30,
            batch_size: 64,
            parallelism: 4,
        }
    }
}

impl EmbedderSpec {
    pub fn remote(endpoint: impl Into<String>) -> Self {
        EmbedderSpec {
            backend: Backend::Remote,
            remote_endpoint: Some(endpoint.into()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != EMBED_DIM {
            return Err(Error::Config(format!(
                "embedding dimension must be {EMBED_DIM}, got {}",
                self.dimension
            )));
        }
        if self.backend == Backend::Remote && self.remote_endpoint.is_none() {
            return Err(Error::Config("remote embedder requires an endpoint".into()));
        }
        let (lo, hi) = self.ngram_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("bad n-gram range ({lo}, {hi})")));
        }
        if self.batch_size == 0 || self.parallelism == 0 {
            return Err(Error::Config("batch size and parallelism must be positive".into()));
        }
        Ok(())
    }
}

/// Where a vector came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupRef {
    pub source_path: String,
    pub timestamp_ms: u32,
    pub elapsed_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVector {
    pub values: Vec<f64>,
    pub group_ref: GroupRef,
}

impl SentenceVector {
    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn ngram_hash(gram: &str) -> u64 {
    XxHash64::oneshot(HASH_SEED, gram.as_bytes())
}

/// Feature-hash `text` into a unit vector (or zeros for empty text) using
/// n-grams in `ngram_range`; n-gram tokens are joined with `_`.
pub fn hash_embed_ngrams(text: &str, ngram_range: (usize, usize)) -> Vec<f64> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut v = vec![0.0; EMBED_DIM];
    let (lo, hi) = ngram_range;
    for n in lo..=hi {
        for window in tokens.windows(n) {
            let h = ngram_hash(&window.join("_"));
            let bucket = (h % EMBED_DIM as u64) as usize;
            v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
    }
    let norm = l2_norm(&v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Unigram + bigram hashing embedding.
pub fn hash_embed(text: &str) -> Vec<f64> {
    hash_embed_ngrams(text, (1, 2))
}

/// Embed a batch of texts; output order matches input order.
pub fn embed_texts(spec: &EmbedderSpec, texts: &[String]) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    match spec.backend {
        Backend::Hashing => Ok(texts
            .iter()
            .map(|t| hash_embed_ngrams(t, spec.ngram_range))
            .collect()),
        Backend::Remote => {
            let endpoint = spec.remote_endpoint.as_deref().expect("validated");
            RemoteEmbedder::new(endpoint, spec).embed(texts)
        }
    }
}

/// Embed every event group of a parsed document.
pub fn embed_document(spec: &EmbedderSpec, doc: &ProfilingDocument) -> Result<Vec<SentenceVector>> {
    let texts: Vec<String> = doc.groups.iter().map(|g| g.text.clone()).collect();
    let vectors = embed_texts(spec, &texts)?;
    Ok(doc
        .groups
        .iter()
        .zip(vectors)
        .map(|(g, values)| SentenceVector {
            values,
            group_ref: GroupRef {
                source_path: doc.source_path.clone(),
                timestamp_ms: g.timestamp_ms,
                elapsed_s: g.elapsed_s,
            },
        })
        .collect())
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    sentences: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for `POST {"sentences": [...]}` -> `{"vectors": [[...512]...]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    agent: ureq::Agent,
    batch_size: usize,
    parallelism: usize,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, spec: &EmbedderSpec) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(spec.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteEmbedder {
            endpoint: endpoint.to_string(),
            agent,
            batch_size: spec.batch_size.max(1),
            parallelism: spec.parallelism.max(1),
        }
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let batches: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let mut results: Vec<Option<Result<Vec<Vec<f64>>>>> = (0..batches.len()).map(|_| None).collect();
        for (wave_idx, wave) in batches.chunks(self.parallelism).enumerate() {
            let base = wave_idx * self.parallelism;
            let out: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| s.spawn(move || self.request(batch)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Transport("worker panicked".into()))))
                    .collect()
            });
            for (i, r) in out.into_iter().enumerate() {
                results[base + i] = Some(r);
            }
        }
        let mut vectors = Vec::with_capacity(texts.len());
        for r in results {
            vectors.extend(r.expect("every batch ran")?);
        }
        Ok(vectors)
    }

    fn request(&self, batch: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(EmbedRequest { sentences: batch })
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Error::Status(status));
        }
        let body: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::MalformedResponse(e.to_string()))?;
        validate_vectors(body.vectors, batch.len())
    }
}

fn validate_vectors(vectors: Vec<Vec<f64>>, expected_rows: usize) -> Result<Vec<Vec<f64>>> {
    if vectors.len() != expected_rows {
        return Err(Error::MalformedResponse(format!(
            "expected {expected_rows} vectors, got {}",
            vectors.len()
        )));
    }
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != EMBED_DIM {
            return Err(Error::DimensionMismatch {
                expected: EMBED_DIM,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
    }
    Ok(vectors)
}
