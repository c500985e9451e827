//! Synthetic srsENB-style log corpora with known labels.
//!
//! Pass and fail runs share their vocabulary and event rate everywhere
//! except inside the divergence window, where fail runs switch to a
//! disjoint pool of failure messages at an altered rate. Pass runs log the
//! completion keyword at a sampled setup time; fail runs never do (or only
//! after the timeout, when requested).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_truth::{write_manifest, ManifestRow, DEFAULT_KEYWORD, DEFAULT_TIMEOUT_S};
use crate::ingest::{format_timestamp, MS_PER_DAY};

/// A message template: layer, level, optional PHY channel, and a body in
/// which `#` is replaced by a random decimal and `%` by a random hex byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub layer: String,
    pub level: String,
    pub channel: Option<String>,
    pub body: String,
}

fn t(layer: &str, level: &str, body: &str) -> Template {
    Template {
        layer: layer.into(),
        level: level.into(),
        channel: None,
        body: body.into(),
    }
}

fn phy(channel: &str, body: &str) -> Template {
    Template {
        layer: "PHY1".into(),
        level: "Info".into(),
        channel: Some(channel.into()),
        body: body.into(),
    }
}

/// Message pools for the three phases of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabProfile {
    /// Connection attempt, first four seconds.
    pub attach: Vec<Template>,
    /// Steady-state traffic shared by both classes.
    pub shared: Vec<Template>,
    /// Fail runs inside the divergence window. Shares no token with the
    /// other pools.
    pub failure: Vec<Template>,
}

impl Default for VocabProfile {
    fn default() -> Self {
        VocabProfile {
            attach: vec![
                t("MAC", "Info", "RACH: tti=#, cc=0, preamble=#, offset=0, temp_crnti=0x4%"),
                t("MAC", "Info", "RAR: tti=#, rnti=0x4%, ta=#, rapid=#"),
                t("RRC", "Info", "Rx rrcConnectionRequest rnti=0x4% (# B)"),
                t("RRC", "Info", "Tx rrcConnectionSetup rnti=0x4% (# B)"),
                t("MAC", "Debug", "Msg3 scheduled tti=#, rnti=0x4%, prb=(#,#), tbs=#"),
                phy("PRACH", "cc=0, idx=#, preamble=#, offset=#, peak2avg=#.#, power=#.# dB"),
            ],
            shared: vec![
                t("RLC", "Info", "DRB1 Tx SDU (# B, tx_sdu_queue_len=#)"),
                t("RLC", "Info", "DRB1 Rx data PDU SN=# (# B)"),
                t("RLC", "Debug", "SRB1 Tx status PDU - ACK_SN = #, N_nack = 0"),
                t("MAC", "Info", "SCHED: DL tx rnti=0x4%, pid=#, mask=0x%, dci=(#,#), n_rtx=0, tbs=#, buffer=#/#"),
                t("MAC", "Info", "SCHED: UL rnti=0x4%, pid=#, dci=(#,#), grant=(#,#), n_rtx=0, tbs=#, bsr=#"),
                t("PDCP", "Info", "TX DRB1 PDU, integrity=NONE, encryption=EEA0 SN=#"),
                t("GTPU", "Info", "RX GTPU PDU rnti=0x4%, lcid=3, n_bytes=#"),
                phy("PDSCH", "l_crb=#, harq=#, snr=#.# dB, CW0: tbs=#, mcs=#, rv=0, crc=OK, it=1, dec_time=# us"),
                phy("PUSCH", "rnti=0x4%, prb=(#,#), tbs=#, mcs=#, rv=0, snr=#.# dB, crc=OK"),
                phy("PUCCH", "rnti=0x4%, format=1, sr=no, ack=1, snr=#.# dB"),
            ],
            failure: vec![
                t("RLC", "Warning", "Maximum retransmissions reached, radio link failure declared"),
                t("MAC", "Warning", "Scheduling request timeout, user inactivity suspected"),
                t("RRC", "Warning", "Discarding unexpected uplinkCCCH message, state mismatch detected"),
                t("RRC", "Error", "ASN decode failure in rrcConnectionReestablishmentRequest, releasing context"),
                t("S1AP", "Info", "Sending UEContextReleaseRequest cause radioNetwork unspecified"),
                phy("PUCCH", "invalid control structure detected, correlation below threshold"),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub n_files: usize,
    pub pass_fraction: f64,
    /// Fail runs diverge in `[start, end)` elapsed seconds.
    pub divergence_window_s: (u64, u64),
    /// Mean timestamp groups per second.
    pub events_per_second: f64,
    /// Event-rate multiplier for fail runs inside the window.
    pub fail_rate_factor: f64,
    /// Run length in seconds for (pass, fail) runs.
    pub duration_s: (u64, u64),
    /// Mean extra seconds after the window start before the keyword.
    pub setup_delay_mean_s: f64,
    /// Share of pass runs whose setup is delayed by a further 5..20 s.
    pub delayed_tail_fraction: f64,
    /// Probability that a record is followed by a hex dump.
    pub hex_dump_probability: f64,
    /// Share of fail runs that log the keyword after the timeout.
    pub late_keyword_fraction: f64,
    pub keyword: String,
    pub timeout_s: u64,
    /// Recorded in `spec.echo`; consumers should drop keyword records
    /// before embedding when set.
    pub exclude_keyword_from_embedding: bool,
    pub vocab_profile: VocabProfile,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_files: 200,
            pass_fraction: 0.5,
            divergence_window_s: (10, 17),
            events_per_second: 4.0,
            fail_rate_factor: 0.9,
            duration_s: (45, 45),
            setup_delay_mean_s: 2.5,
            delayed_tail_fraction: 0.1,
            hex_dump_probability: 0.03,
            late_keyword_fraction: 0.0,
            keyword: DEFAULT_KEYWORD.into(),
            timeout_s: DEFAULT_TIMEOUT_S,
            exclude_keyword_from_embedding: false,
            vocab_profile: VocabProfile::default(),
            seed: 7,
        }
    }
}

impl CorpusSpec {
    /// A start equal to the end gives a zero-width window (no divergence).
    pub fn validate(&self) -> Result<()> {
        let (start, end) = self.divergence_window_s;
        if start > end || end > 40 {
            return Err(Error::Config(format!("bad divergence window ({start}, {end})")));
        }
        if self.n_files < 2 {
            return Err(Error::Config("need at least 2 files".into()));
        }
        if !(0.0..=1.0).contains(&self.pass_fraction) || !(0.0..=1.0).contains(&self.late_keyword_fraction) {
            return Err(Error::Config("fractions must lie in [0, 1]".into()));
        }
        if !(self.events_per_second > 0.0) || !(self.fail_rate_factor > 0.0) {
            return Err(Error::Config("event rates must be positive".into()));
        }
        if self.duration_s.0 == 0 || self.duration_s.1 == 0 {
            return Err(Error::Config("run length must be positive".into()));
        }
        let v = &self.vocab_profile;
        if v.attach.is_empty() || v.shared.is_empty() || v.failure.is_empty() {
            return Err(Error::Config("vocabulary pools must be nonempty".into()));
        }
        Ok(())
    }

    pub fn n_pass(&self) -> usize {
        (self.n_files as f64 * self.pass_fraction).round() as usize
    }

    fn in_window(&self, s: u64) -> bool {
        let (a, b) = self.divergence_window_s;
        s >= a && s < b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFile {
    pub file_name: String,
    pub text: String,
    pub label: u8,
    pub duration_s: Option<u64>,
    /// Number of hex-dump continuation lines written.
    pub hex_lines: usize,
}

fn fill(body: &str, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(body.len() + 16);
    for c in body.chars() {
        match c {
            '#' => {
                let _ = write!(out, "{}", rng.random_range(0..64u32));
            }
            '%' => {
                let _ = write!(out, "{:02x}", rng.random_range(0..256u32));
            }
            c => out.push(c),
        }
    }
    out
}

fn render(tpl: &Template, ts: u32, rng: &mut ChaCha8Rng) -> String {
    let mut line = format!("{} [{:<4}] {:<7} ", format_timestamp(ts), tpl.layer, tpl.level);
    if let Some(ch) = &tpl.channel {
        let _ = write!(line, "[{:05}] {}: ", rng.random_range(0..10240u32), ch);
    }
    line.push_str(&fill(&tpl.body, rng));
    line
}

fn hex_dump(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::from("\t0000:");
    for _ in 0..8 {
        let _ = write!(s, " {:02x}", rng.random_range(0..256u32));
    }
    s
}

/// Distinct sorted millisecond offsets within one second.
fn offsets(count: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let picked = rand::seq::index::sample(rng, 1000, count.min(1000));
    let mut v: Vec<u32> = picked.into_iter().map(|i| i as u32).collect();
    v.sort_unstable();
    v
}

fn setup_time(spec: &CorpusSpec, run_len: u64, rng: &mut ChaCha8Rng) -> u64 {
    let exp = Exp::new(1.0 / spec.setup_delay_mean_s.max(1e-9)).expect("positive rate");
    let mut d = spec.divergence_window_s.0.max(4) + exp.sample(rng).floor() as u64;
    if rng.random_bool(spec.delayed_tail_fraction) {
        d += rng.random_range(5..=20);
    }
    d.min(run_len.saturating_sub(1))
}

/// Generate one file. `index` selects the per-file random stream.
pub fn generate_file(spec: &CorpusSpec, index: usize, label: u8) -> GeneratedFile {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);
    let pass = label == 1;
    let run_len = if pass { spec.duration_s.0 } else { spec.duration_s.1 };
    let start_ms = rng.random_range(0..MS_PER_DAY);
    let setup_at = pass.then(|| setup_time(spec, run_len, &mut rng));
    let late_keyword = !pass && rng.random_bool(spec.late_keyword_fraction);
    let vocab = &spec.vocab_profile;

    let mut text = String::new();
    let mut hex_lines = 0;
    for s in 0..run_len {
        let fail_phase = !pass && spec.in_window(s);
        let rate = if fail_phase {
            spec.events_per_second * spec.fail_rate_factor
        } else {
            spec.events_per_second
        };
        let pool = if s < 4 {
            &vocab.attach
        } else if fail_phase {
            &vocab.failure
        } else {
            &vocab.shared
        };
        let count = (Poisson::new(rate).expect("positive rate").sample(&mut rng) as usize).max(1);
        let mut offs = offsets(count, &mut rng);
        let keyword_at = (setup_at == Some(s)).then(|| rng.random_range(0..offs.len()));
        if s == 0 {
            // the first record opens the run at its start time
            offs[0] = 0;
        }
        for (k, off) in offs.into_iter().enumerate() {
            let ts = (start_ms + s as u32 * 1000 + off) % MS_PER_DAY;
            let records = if rng.random_bool(0.25) { 2 } else { 1 };
            for _ in 0..records {
                let tpl = pool.choose(&mut rng).expect("nonempty pool");
                text.push_str(&render(tpl, ts, &mut rng));
                text.push('\n');
                if rng.random_bool(spec.hex_dump_probability) {
                    text.push_str(&hex_dump(&mut rng));
                    text.push('\n');
                    hex_lines += 1;
                }
            }
            if keyword_at == Some(k) {
                let tpl = t("RRC", "Info", &format!("SRB1 - Rx {} (rnti=0x4%, # B)", spec.keyword));
                text.push_str(&render(&tpl, ts, &mut rng));
                text.push('\n');
            }
        }
    }
    if late_keyword {
        let ts = (start_ms as u64 + (spec.timeout_s + 60) * 1000) % u64::from(MS_PER_DAY);
        let tpl = t("RRC", "Info", &format!("SRB1 - Rx {} (late)", spec.keyword));
        text.push_str(&render(&tpl, ts as u32, &mut rng));
        text.push('\n');
    }
    GeneratedFile {
        file_name: format!("run_{index:04}.log"),
        text,
        label,
        duration_s: setup_at,
        hex_lines,
    }
}

/// Labels for every file index: exactly `n_pass` ones, shuffled by seed.
pub fn label_plan(spec: &CorpusSpec) -> Vec<u8> {
    let n_pass = spec.n_pass();
    let mut labels: Vec<u8> = (0..spec.n_files).map(|i| u8::from(i < n_pass)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    labels.shuffle(&mut rng);
    labels
}

/// Write `logs/*.log`, `labels.csv` and `spec.echo` under `dir`.
pub fn generate_corpus(spec: &CorpusSpec, dir: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    spec.validate()?;
    let dir = dir.as_ref();
    let logs = dir.join("logs");
    fs::create_dir_all(&logs).map_err(|e| Error::io(&logs, e))?;
    let files: Vec<GeneratedFile> = {
        use rayon::prelude::*;
        let plan = label_plan(spec);
        plan.par_iter()
            .enumerate()
            .map(|(i, &label)| generate_file(spec, i, label))
            .collect()
    };
    let mut manifest = Vec::with_capacity(files.len());
    for f in &files {
        let path: PathBuf = logs.join(&f.file_name);
        fs::write(&path, &f.text).map_err(|e| Error::io(&path, e))?;
        manifest.push(ManifestRow {
            source_path: format!("logs/{}", f.file_name),
            label: f.label,
            duration_s: f.duration_s,
        });
    }
    write_manifest(&dir.join("labels.csv"), &manifest)?;
    let echo = toml::to_string(spec).map_err(|e| Error::Config(e.to_string()))?;
    let echo_path = dir.join("spec.echo");
    fs::write(&echo_path, echo).map_err(|e| Error::io(&echo_path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{normalize_content, parse_line, ParsedLine};
    use std::collections::HashSet;

    #[test]
    fn failure_pool_is_disjoint_from_body_tokens() {
        let v = VocabProfile::default();
        let body = |pool: &[Template]| -> HashSet<String> {
            pool.iter()
                .flat_map(|t| normalize_content(&t.body).split(' ').map(str::to_string).collect::<Vec<_>>())
                .collect()
        };
        let fail = body(&v.failure);
        let rest: HashSet<String> = body(&v.shared).union(&body(&v.attach)).cloned().collect();
        assert!(fail.is_disjoint(&rest), "{:?}", fail.intersection(&rest).collect::<Vec<_>>());
    }

    #[test]
    fn exact_pass_split() {
        let spec = CorpusSpec { n_files: 10, ..Default::default() };
        assert_eq!(label_plan(&spec).iter().filter(|&&l| l == 1).count(), 5);
    }

    #[test]
    fn generated_lines_parse() {
        let spec = CorpusSpec { hex_dump_probability: 0.2, ..Default::default() };
        for (i, label) in [(0, 0), (1, 1)] {
            let f = generate_file(&spec, i, label);
            let skips = f.text.lines().filter(|l| parse_line(l) == ParsedLine::Skip).count();
            assert_eq!(skips, f.hex_lines);
            assert_eq!(f.text.contains(DEFAULT_KEYWORD), label == 1);
        }
    }

    #[test]
    fn deterministic() {
        let spec = CorpusSpec::default();
        assert_eq!(generate_file(&spec, 3, 1), generate_file(&spec, 3, 1));
        assert_ne!(generate_file(&spec, 3, 1).text, generate_file(&spec, 4, 1).text);
    }

    #[test]
    fn window_validation() {
        assert!(CorpusSpec { divergence_window_s: (10, 10), ..Default::default() }.validate().is_ok());
        assert!(CorpusSpec { divergence_window_s: (12, 10), ..Default::default() }.validate().is_err());
        assert!(CorpusSpec { divergence_window_s: (10, 41), ..Default::default() }.validate().is_err());
        assert!(CorpusSpec { n_files: 1, ..Default::default() }.validate().is_err());
    }
}
