//! Semantic detection of failed or anomalous 5G stack runs from fuzzing
//! logs.
//!
//! The pipeline parses srsRAN profiling logs ([`ingest`]), labels each run
//! by keyword ([`ground_truth`]), embeds timestamp groups as sentence
//! vectors ([`embed`]), projects every file to 2-D with t-SNE ([`tsne`]),
//! turns the projection into per-second centroid distances ([`features`])
//! and classifies the outcome ([`classify`]). [`synth`] generates labelled
//! corpora and [`pipeline`] wires the stages to on-disk artifacts.

pub mod classify;
pub mod embed;
pub mod error;
pub mod features;
pub mod ground_truth;
pub mod ingest;
pub mod pipeline;
pub mod synth;
pub mod tsne;

pub use error::{Error, Result};
