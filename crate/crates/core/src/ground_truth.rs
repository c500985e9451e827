//! Keyword-derived connection outcome labels and setup durations.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{elapsed_seconds, ProfilingDocument};

pub const DEFAULT_KEYWORD: &str = "rrcConnectionSetupComplete";
pub const DEFAULT_TIMEOUT_S: u64 = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeLabel {
    /// 1 = connection established, 0 = failed.
    pub label: u8,
    pub matched_at_ms: Option<u32>,
    pub duration_s: Option<u64>,
}

impl OutcomeLabel {
    pub fn fail() -> Self {
        OutcomeLabel {
            label: 0,
            matched_at_ms: None,
            duration_s: None,
        }
    }

    pub fn is_success(&self) -> bool {
        self.label == 1
    }
}

/// Label a document by searching raw record content for `keyword`.
///
/// The first record containing the keyword within `timeout_s` of the first
/// record decides success; its elapsed whole seconds are the duration.
pub fn label_outcome(doc: &ProfilingDocument, keyword: &str, timeout_s: u64) -> OutcomeLabel {
    let Some(first) = doc.records.first() else {
        return OutcomeLabel::fail();
    };
    let first_ms = first.timestamp_ms;
    doc.records
        .iter()
        .filter(|r| r.content.contains(keyword))
        .map(|r| (r.timestamp_ms, elapsed_seconds(first_ms, r.timestamp_ms)))
        .find(|&(_, elapsed)| elapsed <= timeout_s)
        .map_or_else(OutcomeLabel::fail, |(ts, elapsed)| OutcomeLabel {
            label: 1,
            matched_at_ms: Some(ts),
            duration_s: Some(elapsed),
        })
}

/// Fixed-width histogram of setup durations over successful labels.
/// Keys are bin lower edges; empty bins are omitted.
pub fn duration_histogram(labels: &[OutcomeLabel], bin_width_s: u64) -> BTreeMap<u64, usize> {
    assert!(bin_width_s > 0, "bin width must be positive");
    let mut hist = BTreeMap::new();
    for d in labels.iter().filter_map(|l| l.duration_s) {
        *hist.entry(d / bin_width_s * bin_width_s).or_insert(0) += 1;
    }
    hist
}

/// One row of a label manifest (`source_path,label,duration_s`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub source_path: String,
    pub label: u8,
    pub duration_s: Option<u64>,
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::artifact(path, e))?;
    w.write_record(["source_path", "label", "duration_s"])
        .map_err(|e| Error::artifact(path, e))?;
    for r in rows {
        let d = r.duration_s.map(|d| d.to_string()).unwrap_or_default();
        w.write_record([r.source_path.as_str(), &r.label.to_string(), &d])
            .map_err(|e| Error::artifact(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::artifact(path, e))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::artifact(path, e))?;
        let label = rec[1].parse().map_err(|e| Error::artifact(path, e))?;
        let duration_s = if rec[2].is_empty() {
            None
        } else {
            Some(rec[2].parse().map_err(|e| Error::artifact(path, e))?)
        };
        rows.push(ManifestRow {
            source_path: rec[0].to_string(),
            label,
            duration_s,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_text, IngestOptions};

    fn doc(lines: &[(u32, &str)]) -> ProfilingDocument {
        let text: String = lines
            .iter()
            .map(|(ts, c)| format!("{} [RRC ] Info {c}\n", crate::ingest::format_timestamp(*ts)))
            .collect();
        parse_text("t.log", &text, &IngestOptions::default()).unwrap()
    }

    fn success(d: u64) -> OutcomeLabel {
        OutcomeLabel {
            label: 1,
            matched_at_ms: Some(0),
            duration_s: Some(d),
        }
    }

    #[test]
    fn keyword_found() {
        let d = doc(&[(1000, "start"), (13_500, "Rx rrcConnectionSetupComplete rnti=0x46")]);
        let l = label_outcome(&d, DEFAULT_KEYWORD, DEFAULT_TIMEOUT_S);
        assert_eq!(l.label, 1);
        assert_eq!(l.duration_s, Some(12));
        assert_eq!(l.matched_at_ms, Some(13_500));
    }

    #[test]
    fn keyword_absent() {
        let d = doc(&[(1000, "start"), (2000, "rrcConnectionRequest")]);
        assert_eq!(label_outcome(&d, DEFAULT_KEYWORD, 600), OutcomeLabel::fail());
    }

    #[test]
    fn keyword_after_timeout() {
        let d = doc(&[(0, "start"), (700_000, "rrcConnectionSetupComplete")]);
        assert_eq!(label_outcome(&d, DEFAULT_KEYWORD, 600).label, 0);
        assert_eq!(label_outcome(&d, DEFAULT_KEYWORD, 700).label, 1);
    }

    #[test]
    fn keyword_is_case_sensitive_substring() {
        let d = doc(&[(0, "xxrrcConnectionSetupCompletexx")]);
        assert_eq!(label_outcome(&d, DEFAULT_KEYWORD, 600).label, 1);
        let d = doc(&[(0, "rrcconnectionsetupcomplete")]);
        assert_eq!(label_outcome(&d, DEFAULT_KEYWORD, 600).label, 0);
    }

    #[test]
    fn histogram_examples() {
        let h = duration_histogram(&[success(12), success(12), success(15)], 5);
        assert_eq!(h, BTreeMap::from([(10, 2), (15, 1)]));
        assert!(duration_histogram(&[OutcomeLabel::fail()], 5).is_empty());
        assert_eq!(duration_histogram(&[success(0)], 1), BTreeMap::from([(0, 1)]));
    }
}
