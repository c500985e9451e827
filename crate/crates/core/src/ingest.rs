//! Parsing of srsENB/srsUE profiling logs into structured records and
//! timestamp-keyed event groups.
//!
//! Two line shapes are recognised:
//!
//! ```text
//! 17:52:25.246 [RLC ] Info DRB1 Tx SDU
//! 17:52:26.094 [PHY1] Info [05788] PDSCH: l_crb=1, harq=0, ...
//! ```
//!
//! Anything else (hex dumps, banners, wrapped text) is a continuation of
//! the preceding record.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MS_PER_DAY: u32 = 86_400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Debug,
    Info,
    Warning,
    Error,
}

impl Level {
    /// Case-insensitive level lookup. `None` for strings that are not a level.
    pub fn parse(s: &str) -> Option<Level> {
        match s.to_ascii_lowercase().as_str() {
            "debug" => Some(Level::Debug),
            "info" => Some(Level::Info),
            "warning" | "warn" => Some(Level::Warning),
            "error" => Some(Level::Error),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Debug => "Debug",
            Level::Info => "Info",
            Level::Warning => "Warning",
            Level::Error => "Error",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One parsed log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Milliseconds since midnight.
    pub timestamp_ms: u32,
    pub layer: String,
    pub level: Level,
    pub subframe: Option<u32>,
    pub channel: Option<String>,
    pub content: String,
}

impl LogRecord {
    /// Render the record back into the log grammar.
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "{} [{}] {}",
            format_timestamp(self.timestamp_ms),
            self.layer,
            self.level
        );
        if let (Some(sf), Some(ch)) = (self.subframe, &self.channel) {
            line.push_str(&format!(" [{sf:05}] {ch}:"));
        }
        line.push(' ');
        line.push_str(&self.content);
        line
    }
}

/// Result of [`parse_line`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedLine {
    Record(LogRecord),
    /// Line does not start a record.
    Skip,
}

/// All normalized content sharing one millisecond timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventGroup {
    pub timestamp_ms: u32,
    pub elapsed_s: u64,
    pub text: String,
    /// Number of records that contributed to `text`.
    #[serde(default)]
    pub record_count: usize,
}

/// One log file, parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilingDocument {
    pub source_path: String,
    pub records: Vec<LogRecord>,
    pub groups: Vec<EventGroup>,
    /// Records whose level string was not recognised and fell back to Info.
    pub unknown_levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingMode {
    /// One group per distinct millisecond timestamp.
    #[default]
    Millisecond,
    /// One group per elapsed second.
    Second,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub grouping: GroupingMode,
    /// Records whose raw content contains this string are left out of the
    /// groups (they remain in `records`).
    pub exclude_from_groups: Option<String>,
}

pub fn format_timestamp(ms: u32) -> String {
    let h = ms / 3_600_000;
    let m = (ms / 60_000) % 60;
    let s = (ms / 1000) % 60;
    format!("{h:02}:{m:02}:{s:02}.{:03}", ms % 1000)
}

fn parse_timestamp(tok: &str) -> Option<u32> {
    let b = tok.as_bytes();
    if b.len() != 12 || b[2] != b':' || b[5] != b':' || b[8] != b'.' {
        return None;
    }
    let num = |r: std::ops::Range<usize>| -> Option<u32> {
        let s = &tok[r];
        if s.bytes().all(|c| c.is_ascii_digit()) {
            s.parse().ok()
        } else {
            None
        }
    };
    let (h, m, s, ms) = (num(0..2)?, num(3..5)?, num(6..8)?, num(9..12)?);
    if h > 23 || m > 59 || s > 59 {
        return None;
    }
    Some(((h * 60 + m) * 60 + s) * 1000 + ms)
}

/// Parse one line. Lines that are not records yield [`ParsedLine::Skip`].
pub fn parse_line(line: &str) -> ParsedLine {
    parse_line_inner(line).map_or(ParsedLine::Skip, |(r, _)| ParsedLine::Record(r))
}

// Returns the record and whether the level was unknown.
fn parse_line_inner(line: &str) -> Option<(LogRecord, bool)> {
    let line = line.trim_end_matches(['\r', '\n']);
    let ts_tok = line.get(..12)?;
    let timestamp_ms = parse_timestamp(ts_tok)?;
    let rest = line[12..].trim_start();
    let rest = rest.strip_prefix('[')?;
    let close = rest.find(']')?;
    let layer = rest[..close].trim();
    if layer.is_empty() || layer.contains(char::is_whitespace) {
        return None;
    }
    let rest = rest[close + 1..].trim_start();
    let (level_tok, rest) = match rest.find(char::is_whitespace) {
        Some(i) => (&rest[..i], rest[i..].trim_start()),
        None => (rest, ""),
    };
    if level_tok.is_empty() {
        return None;
    }
    let (level, unknown) = match Level::parse(level_tok) {
        Some(l) => (l, false),
        None => (Level::Info, true),
    };
    let mut subframe = None;
    let mut channel = None;
    let mut content = rest;
    if let Some((sf, ch, body)) = parse_phy_prefix(rest) {
        subframe = Some(sf);
        channel = Some(ch.to_string());
        content = body;
    }
    if content.is_empty() {
        return None;
    }
    Some((
        LogRecord {
            timestamp_ms,
            layer: layer.to_string(),
            level,
            subframe,
            channel,
            content: content.to_string(),
        },
        unknown,
    ))
}

// "[05788] PDSCH: body"
fn parse_phy_prefix(s: &str) -> Option<(u32, &str, &str)> {
    let s = s.strip_prefix('[')?;
    let close = s.find(']')?;
    let digits = &s[..close];
    if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let sf = digits.parse().ok()?;
    let rest = s[close + 1..].trim_start();
    let colon = rest.find(':')?;
    let ch = &rest[..colon];
    if ch.is_empty() || !ch.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'_') {
        return None;
    }
    Some((sf, ch, rest[colon + 1..].trim_start()))
}

/// Replace every non-ASCII-alphanumeric character with a space, collapse
/// runs of spaces and trim. Case is preserved.
pub fn normalize_content(content: &str) -> String {
    let mut out = String::with_capacity(content.len());
    for tok in content
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Whole seconds from `first_ms` to `ts_ms`, wrapping once across midnight.
pub fn elapsed_seconds(first_ms: u32, ts_ms: u32) -> u64 {
    let delta = if ts_ms >= first_ms {
        ts_ms - first_ms
    } else {
        ts_ms + MS_PER_DAY - first_ms
    };
    u64::from(delta / 1000)
}

/// Group records sharing a timestamp. Groups appear in first-occurrence
/// order, which for a log file is timestamp order.
pub fn group_records(records: &[LogRecord]) -> Vec<EventGroup> {
    group_records_with(records, &IngestOptions::default())
}

pub fn group_records_with(records: &[LogRecord], opts: &IngestOptions) -> Vec<EventGroup> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let first_ms = first.timestamp_ms;
    let mut groups: Vec<EventGroup> = Vec::new();
    for rec in records {
        if let Some(pat) = &opts.exclude_from_groups {
            if rec.content.contains(pat.as_str()) {
                continue;
            }
        }
        let elapsed_s = elapsed_seconds(first_ms, rec.timestamp_ms);
        let same = match (groups.last(), opts.grouping) {
            (Some(g), GroupingMode::Millisecond) => g.timestamp_ms == rec.timestamp_ms,
            (Some(g), GroupingMode::Second) => g.elapsed_s == elapsed_s,
            (None, _) => false,
        };
        let norm = normalize_content(&rec.content);
        if same {
            let g = groups.last_mut().expect("checked above");
            if !norm.is_empty() {
                if !g.text.is_empty() {
                    g.text.push(' ');
                }
                g.text.push_str(&norm);
            }
            g.record_count += 1;
        } else {
            groups.push(EventGroup {
                timestamp_ms: rec.timestamp_ms,
                elapsed_s,
                text: norm,
                record_count: 1,
            });
        }
    }
    // Out-of-order duplicates of an earlier timestamp are merged back.
    merge_nonadjacent(groups, opts.grouping)
}

fn merge_nonadjacent(groups: Vec<EventGroup>, mode: GroupingMode) -> Vec<EventGroup> {
    let key = |g: &EventGroup| match mode {
        GroupingMode::Millisecond => u64::from(g.timestamp_ms),
        GroupingMode::Second => g.elapsed_s,
    };
    let mut seen = std::collections::HashMap::new();
    let mut out: Vec<EventGroup> = Vec::with_capacity(groups.len());
    for g in groups {
        match seen.get(&key(&g)) {
            Some(&idx) => {
                let tgt: &mut EventGroup = &mut out[idx];
                if !g.text.is_empty() {
                    if !tgt.text.is_empty() {
                        tgt.text.push(' ');
                    }
                    tgt.text.push_str(&g.text);
                }
                tgt.record_count += g.record_count;
            }
            None => {
                seen.insert(key(&g), out.len());
                out.push(g);
            }
        }
    }
    out
}

/// Parse log text that was read from `source_path`.
pub fn parse_text(source_path: &str, text: &str, opts: &IngestOptions) -> Result<ProfilingDocument> {
    let mut records: Vec<LogRecord> = Vec::new();
    let mut unknown_levels = 0;
    for line in text.lines() {
        match parse_line_inner(line) {
            Some((rec, unknown)) => {
                unknown_levels += usize::from(unknown);
                records.push(rec);
            }
            None => {
                let cont = line.trim();
                if cont.is_empty() {
                    continue;
                }
                if let Some(prev) = records.last_mut() {
                    prev.content.push(' ');
                    prev.content.push_str(cont);
                }
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDocument(source_path.to_string()));
    }
    let groups = group_records_with(&records, opts);
    Ok(ProfilingDocument {
        source_path: source_path.to_string(),
        records,
        groups,
        unknown_levels,
    })
}

pub fn parse_file(path: impl AsRef<Path>) -> Result<ProfilingDocument> {
    parse_file_with(path, &IngestOptions::default())
}

/// Read and parse one log file. Invalid UTF-8 is decoded lossily.
pub fn parse_file_with(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<ProfilingDocument> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    parse_text(&path.display().to_string(), &text, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ts: u32, content: &str) -> LogRecord {
        LogRecord {
            timestamp_ms: ts,
            layer: "RLC".into(),
            level: Level::Info,
            subframe: None,
            channel: None,
            content: content.into(),
        }
    }

    #[test]
    fn parses_plain_line() {
        let ParsedLine::Record(r) = parse_line("17:52:25.246 [RLC ] Info DRB1 Tx SDU") else {
            panic!("expected record");
        };
        assert_eq!(r.timestamp_ms, 64_345_246);
        assert_eq!(r.layer, "RLC");
        assert_eq!(r.level, Level::Info);
        assert_eq!(r.subframe, None);
        assert_eq!(r.channel, None);
        assert_eq!(r.content, "DRB1 Tx SDU");
    }

    #[test]
    fn parses_phy_line() {
        let ParsedLine::Record(r) =
            parse_line("17:52:26.094 [PHY1] Info [05788] PDSCH: l_crb=1, harq=0, ...")
        else {
            panic!("expected record");
        };
        assert_eq!(r.timestamp_ms, 64_346_094);
        assert_eq!(r.layer, "PHY1");
        assert_eq!(r.subframe, Some(5788));
        assert_eq!(r.channel.as_deref(), Some("PDSCH"));
        assert_eq!(r.content, "l_crb=1, harq=0, ...");
    }

    #[test]
    fn skips_non_records() {
        assert_eq!(parse_line(""), ParsedLine::Skip);
        assert_eq!(parse_line("    0000: 40 12 a0 3f"), ParsedLine::Skip);
        assert_eq!(parse_line("Built in Release mode using commit 1a2b3c"), ParsedLine::Skip);
        assert_eq!(parse_line("25:00:00.000 [RLC ] Info x"), ParsedLine::Skip);
        assert_eq!(parse_line("17:52:25.246 [RLC ] Info"), ParsedLine::Skip);
    }

    #[test]
    fn level_is_case_insensitive_and_unknown_falls_back() {
        let ParsedLine::Record(r) = parse_line("00:00:01.000 [MAC] WARNING x") else {
            panic!()
        };
        assert_eq!(r.level, Level::Warning);
        let doc = parse_text("t", "00:00:01.000 [MAC] Verbose x\n", &IngestOptions::default()).unwrap();
        assert_eq!(doc.records[0].level, Level::Info);
        assert_eq!(doc.unknown_levels, 1);
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_content("l_crb=1, harq=0"), "l crb 1 harq 0");
        assert_eq!(normalize_content("DRB1 Tx SDU"), "DRB1 Tx SDU");
        assert_eq!(normalize_content("***"), "");
        assert_eq!(normalize_content("  héllo\twörld "), "h llo w rld");
    }

    #[test]
    fn same_timestamp_single_group() {
        let g = group_records(&[rec(64_345_246, "a"), rec(64_345_246, "b=c")]);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].text, "a b c");
        assert_eq!(g[0].elapsed_s, 0);
        assert_eq!(g[0].record_count, 2);
    }

    #[test]
    fn midnight_wrap() {
        // 23:59:59.900 then 00:00:00.200 is 300 ms later
        let g = group_records(&[rec(86_399_900, "a"), rec(200, "b")]);
        assert_eq!(g.len(), 2);
        assert_eq!(g[1].elapsed_s, 0);
        let g = group_records(&[rec(86_399_900, "a"), rec(1_000, "b")]);
        assert_eq!(g[1].elapsed_s, 1);
    }

    #[test]
    fn floor_seconds() {
        let t0 = 1_000_000;
        let g = group_records(&[rec(t0, "a"), rec(t0 + 5400, "b")]);
        assert_eq!(g.iter().map(|g| g.elapsed_s).collect::<Vec<_>>(), vec![0, 5]);
    }

    #[test]
    fn per_second_grouping() {
        let opts = IngestOptions { grouping: GroupingMode::Second, ..Default::default() };
        let g = group_records_with(&[rec(0, "a"), rec(10, "b"), rec(1500, "c")], &opts);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].text, "a b");
    }

    #[test]
    fn exclusion_leaves_records() {
        let opts = IngestOptions {
            exclude_from_groups: Some("secret".into()),
            ..Default::default()
        };
        let doc = parse_text(
            "t",
            "00:00:01.000 [RRC] Info hello\n00:00:02.000 [RRC] Info a secret here\n",
            &opts,
        )
        .unwrap();
        assert_eq!(doc.records.len(), 2);
        assert_eq!(doc.groups.len(), 1);
    }

    #[test]
    fn continuation_lines_attach() {
        let text = "garbage banner\n00:00:01.000 [RRC] Info Tx msg\n  0000: 40 12\n\n00:00:01.500 [RRC] Info next\n";
        let doc = parse_text("t", text, &IngestOptions::default()).unwrap();
        assert_eq!(doc.records.len(), 2);
        assert_eq!(doc.records[0].content, "Tx msg 0000: 40 12");
    }

    #[test]
    fn empty_document_is_error() {
        let err = parse_text("t", "\u{0}\u{1}binary", &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyDocument(_)));
    }

    #[test]
    fn record_to_line_round_trip() {
        let line = "17:52:26.094 [PHY1] Info [05788] PDSCH: l_crb=1";
        let ParsedLine::Record(r) = parse_line(line) else { panic!() };
        assert_eq!(r.to_line(), line);
    }
}
