use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use logvuln::classify::{ClassifierKind, EvalProtocol};
use logvuln::embed::Backend;
use logvuln::ingest::GroupingMode;
use logvuln::pipeline::{self, PipelineConfig};
use logvuln::synth::{self, CorpusSpec};
use logvuln::{Error, Result};

#[derive(Parser)]
#[command(name = "logvuln", version, about = "Detect failed 5G runs from fuzzing logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Parse logs into timestamp groups (groups.jsonl).
    Parse,
    /// Label runs by keyword (labels.csv).
    Label,
    /// Embed timestamp groups (embeddings.bin).
    Embed,
    /// Project each file to 2-D (projection.csv, kl_trace.csv).
    Reduce,
    /// Per-second centroid distances (features.csv).
    Featurize,
    /// Fit classifiers on all runs (models/).
    Train,
    /// Cross-validated or holdout evaluation (report.json, roc_*.csv).
    Evaluate,
    /// Accuracy as a function of the observation window (sweep.csv).
    Sweep,
    /// Generate a labelled synthetic corpus.
    Synth(SynthArgs),
    /// Every stage in order, then the report.
    RunAll,
    /// Summarise evaluation artifacts.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierChoice {
    Logreg,
    Knn,
    #[value(alias = "random-forest")]
    Forest,
    All,
}

#[derive(Args)]
struct Opts {
    /// Log files, directories or glob patterns.
    #[arg(long, global = true, num_args = 1..)]
    input: Vec<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with pipeline settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    keyword: Option<String>,
    #[arg(long, global = true)]
    timeout_s: Option<u64>,
    #[arg(long, global = true)]
    group_by_second: bool,
    /// Leave keyword records out of the embedded groups.
    #[arg(long, global = true)]
    exclude_keyword: bool,
    #[arg(long, global = true, value_parser = ["hashing", "remote"])]
    embedder: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    perplexity: Option<f64>,
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true, value_enum)]
    classifier: Option<ClassifierChoice>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Use a stratified holdout split of this size instead of folds.
    #[arg(long, global = true, conflicts_with = "folds")]
    holdout: Option<f64>,
    /// Comma-separated horizons in seconds.
    #[arg(long, global = true, value_delimiter = ',')]
    horizons: Option<Vec<u64>>,
    #[arg(long, global = true, overrides_with = "no_masks")]
    use_masks: bool,
    #[arg(long, global = true)]
    no_masks: bool,
    #[arg(long, global = true)]
    compat_distance: bool,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n_files: Option<usize>,
    #[arg(long)]
    pass_fraction: Option<f64>,
    /// Divergence window as START,END seconds.
    #[arg(long, value_delimiter = ',')]
    window: Option<Vec<u64>>,
    #[arg(long)]
    events_per_second: Option<f64>,
    #[arg(long)]
    fail_rate_factor: Option<f64>,
    #[arg(long)]
    duration_s: Option<u64>,
    #[arg(long)]
    late_keyword_fraction: Option<f64>,
    #[arg(long)]
    hex_dump_probability: Option<f64>,
}

fn build_config(o: &Opts) -> Result<PipelineConfig> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if !o.input.is_empty() {
        cfg.input = o.input.clone();
    }
    if let Some(v) = &o.out {
        cfg.out = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = &o.keyword {
        cfg.keyword = v.clone();
    }
    if let Some(v) = o.timeout_s {
        cfg.timeout_s = v;
    }
    if o.group_by_second {
        cfg.grouping = GroupingMode::Second;
    }
    if o.exclude_keyword {
        cfg.exclude_keyword = true;
    }
    match o.embedder.as_deref() {
        Some("remote") => cfg.embedder.backend = Backend::Remote,
        Some(_) => cfg.embedder.backend = Backend::Hashing,
        None => {}
    }
    if let Some(v) = &o.endpoint {
        cfg.embedder.remote_endpoint = Some(v.clone());
    }
    if let Some(v) = o.perplexity {
        cfg.tsne.perplexity = v;
    }
    if let Some(v) = o.iters {
        cfg.tsne.iters = v;
    }
    if let Some(v) = o.eta {
        cfg.tsne.eta = v;
    }
    if let Some(c) = o.classifier {
        cfg.classifiers = match c {
            ClassifierChoice::Logreg => vec![ClassifierKind::LogReg],
            ClassifierChoice::Knn => vec![ClassifierKind::Knn],
            ClassifierChoice::Forest => vec![ClassifierKind::RandomForest],
            ClassifierChoice::All => ClassifierKind::ALL.to_vec(),
        };
    }
    if let Some(folds) = o.folds {
        cfg.protocol = EvalProtocol::CrossValidation { folds };
    }
    if let Some(test_fraction) = o.holdout {
        cfg.protocol = EvalProtocol::Holdout { test_fraction };
    }
    if let Some(h) = &o.horizons {
        cfg.horizons = h.clone();
    }
    if o.use_masks {
        cfg.use_masks = true;
    }
    if o.no_masks {
        cfg.use_masks = false;
    }
    if o.compat_distance {
        cfg.compat_distance = true;
    }
    if o.workers.is_some() {
        cfg.workers = o.workers;
    }
    if o.quiet {
        cfg.verbosity = 0;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth_spec(o: &Opts, a: &SynthArgs) -> Result<CorpusSpec> {
    let mut spec = CorpusSpec::default();
    if let Some(v) = o.seed {
        spec.seed = v;
    }
    if let Some(v) = &o.keyword {
        spec.keyword = v.clone();
    }
    if let Some(v) = o.timeout_s {
        spec.timeout_s = v;
    }
    spec.exclude_keyword_from_embedding = o.exclude_keyword;
    if let Some(v) = a.n_files {
        spec.n_files = v;
    }
    if let Some(v) = a.pass_fraction {
        spec.pass_fraction = v;
    }
    if let Some(w) = &a.window {
        let [start, end] = w[..] else {
            return Err(Error::Config("--window takes START,END".into()));
        };
        spec.divergence_window_s = (start, end);
    }
    if let Some(v) = a.events_per_second {
        spec.events_per_second = v;
    }
    if let Some(v) = a.fail_rate_factor {
        spec.fail_rate_factor = v;
    }
    if let Some(v) = a.duration_s {
        spec.duration_s = (v, v);
    }
    if let Some(v) = a.late_keyword_fraction {
        spec.late_keyword_fraction = v;
    }
    if let Some(v) = a.hex_dump_probability {
        spec.hex_dump_probability = v;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Synth(a) = &cli.command {
        let out = cli.opts.out.clone().unwrap_or_else(|| PathBuf::from("corpus"));
        let rows = synth::generate_corpus(&synth_spec(&cli.opts, a)?, &out)?;
        let passed = rows.iter().filter(|r| r.label == 1).count();
        println!("wrote {} runs ({passed} passed) to {}", rows.len(), out.display());
        return Ok(());
    }
    if let Command::Report = cli.command {
        let out = cli.opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        print!("{}", pipeline::report(&out)?);
        return Ok(());
    }
    let cfg = build_config(&cli.opts)?;
    match cli.command {
        Command::Parse => println!("{} groups", pipeline::stage_parse(&cfg)?),
        Command::Label => {
            let rows = pipeline::stage_label(&cfg)?;
            let passed = rows.iter().filter(|r| r.label == 1).count();
            println!("{} runs, {passed} passed", rows.len());
        }
        Command::Embed => println!("{} vectors", pipeline::stage_embed(&cfg)?),
        Command::Reduce => println!("{} points", pipeline::stage_reduce(&cfg)?),
        Command::Featurize => println!("{} feature rows", pipeline::stage_featurize(&cfg)?.len()),
        Command::Train => {
            for p in pipeline::stage_train(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate => {
            for r in pipeline::stage_evaluate(&cfg)? {
                println!("{:<7} accuracy {:.4} auc {:.4}", r.kind.name(), r.accuracy, r.auc);
            }
        }
        Command::Sweep => {
            for (kind, acc) in pipeline::stage_sweep(&cfg)? {
                let cells: Vec<String> = acc.iter().map(|(h, a)| format!("{h}:{a:.3}")).collect();
                println!("{:<7} {}", kind.name(), cells.join(" "));
            }
        }
        Command::RunAll => print!("{}", pipeline::run_all(&cfg)?),
        Command::Synth(_) | Command::Report => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
