mod config;

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use morph_core::augmenter::{run_augmentation, GenMode, HttpGenerator, OfflineGenerator, SentenceGenerator, Targets};
use morph_core::corpus::review::{apply_decisions, collaborative_filter, AuditEntry, Decision, ReviewItem, ReviewState};
use morph_core::corpus::{preprocess_for_classification, split_check, ClassificationRecord, Corpus, LoadMode, Split};
use morph_core::evaluator::{class_report, compare, evaluate_with, EvalOptions, EvalReport, EvalSample, NamedReport, Prediction};
use morph_core::fixtures::fixture_lexicon;
use morph_core::io::{read_jsonl, write_atomic, write_jsonl};
use morph_core::lexicon::{validate_lexicon, MorphLexicon};
use morph_core::phonetics::PhoneticsTable;
use morph_core::resolver::{resolve_batch, FileBackend, HttpBackend, PredictionBackend, Resolution, ResolveMode, Resolver, ResolverConfig};
use morph_service::{AppState, ServiceConfig, Store};
use serde::Deserialize;
use serde_json::json;

use crate::config::FileConfig;

const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "morph", version, about = "Detect and restore morphs in live-stream transcripts")]
struct Cli {
    /// TOML file with defaults for any of the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Restore morphs in a corpus or a single sentence.
    Resolve(ResolveArgs),
    /// Score predictions against gold targets.
    Eval(EvalArgs),
    /// Tabulate several evaluation reports.
    Compare(CompareArgs),
    /// Generate training pairs from the lexicon.
    Augment(AugmentArgs),
    /// Build a review queue from disagreements between the resolver and gold annotations.
    Filter(FilterArgs),
    /// Apply review decisions to a corpus and lexicon.
    Apply(ApplyArgs),
    /// Inspect a lexicon.
    Lexicon {
        #[command(subcommand)]
        command: LexiconCommand,
    },
    /// Corpus statistics and split checks.
    Stats(StatsArgs),
    /// Resolve classification texts before they reach a classifier.
    Preprocess(PreprocessArgs),
    /// Run the review service.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Clone, Default)]
struct ResolverArgs {
    /// Lexicon TSV; the built-in lexicon when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// dict, full or backend.
    #[arg(long)]
    mode: Option<ResolveMode>,
    /// Maximum normalized phonetic distance for generative matches.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_fillers: Option<usize>,
    /// Comma-separated filler strings.
    #[arg(long, value_delimiter = ',')]
    fillers: Option<Vec<String>>,
    /// Let tone differences count towards phonetic distance.
    #[arg(long)]
    toned: bool,
    /// TSV of `id<TAB>prediction` used as the backend.
    #[arg(long)]
    backend_file: Option<PathBuf>,
    /// HTTP endpoint answering `{id, text}` with `{id, text}`.
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long)]
    backend_parallelism: Option<usize>,
}

#[derive(Debug, Args)]
struct ResolveArgs {
    #[command(flatten)]
    resolver: ResolverArgs,
    /// Corpus JSONL to resolve.
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    input: Option<PathBuf>,
    /// Resolve one sentence and print the result.
    #[arg(long)]
    text: Option<String>,
    /// Only records of this split.
    #[arg(long)]
    split: Option<Split>,
    /// Predictions JSONL; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Print the full resolution as JSON for `--text`.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Gold corpus JSONL (or labelled records with `--classes`).
    #[arg(long)]
    gold: PathBuf,
    /// Predictions JSONL.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    split: Option<Split>,
    /// Lexicon used to break results down by morph kind.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Count a positive that was edited wrongly as a false positive.
    #[arg(long)]
    fp_on_bad_edit: bool,
    /// Three-class violation report over `{id, label}` records.
    #[arg(long)]
    classes: bool,
    /// Write the report as JSON.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// `SYSTEM:TEST_SET=report.json`, repeatable.
    #[arg(long = "report", required = true)]
    reports: Vec<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Lexicon TSV; the built-in lexicon when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Training corpus; only its train split is used.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// offline or llm.
    #[arg(long)]
    mode: Option<GenMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draw this many training positives to pick originals instead of using every original.
    #[arg(long)]
    draws: Option<usize>,
    /// Do not emit the generated sentences as negatives.
    #[arg(long)]
    no_negatives: bool,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    retry_budget: Option<u32>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[command(flatten)]
    resolver: ResolverArgs,
    #[arg(long)]
    corpus: PathBuf,
    /// Queue JSONL.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ApplyArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    queue: PathBuf,
    /// Decisions JSONL: `{item, action, spans?, reviewer?, timestamp?}`.
    #[arg(long)]
    decisions: PathBuf,
    /// Receives corpus.jsonl, lexicon.tsv, queue.jsonl and audit.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum LexiconCommand {
    /// Report nested variants, originals containing variants and missing readings.
    Validate {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Exit 1 when there are warnings.
        #[arg(long)]
        strict: bool,
    },
    Stats {
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Load with quarantine instead of failing on the first bad record.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[command(flatten)]
    resolver: ResolverArgs,
    /// `{id, text, label}` JSONL.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Store directory.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    readonly: bool,
    /// Bearer token required on every route but health.
    #[arg(long)]
    token: Option<String>,
    /// Directory of static UI assets.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    /// Seed a new store from this corpus (queue built with the filter).
    #[arg(long, requires = "init_lexicon")]
    init_corpus: Option<PathBuf>,
    #[arg(long)]
    init_lexicon: Option<PathBuf>,
}

/// Errors in how the tool was invoked, as opposed to problems with the data.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn need_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(p) => {
            need_file(p)?;
            FileConfig::load(p).map_err(|e| usage(format!("{e:#}")))?
        }
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Resolve(a) => cmd_resolve(a, &file),
        Command::Eval(a) => cmd_eval(a, &file),
        Command::Compare(a) => cmd_compare(a, &file),
        Command::Augment(a) => cmd_augment(a, &file),
        Command::Filter(a) => cmd_filter(a, &file),
        Command::Apply(a) => cmd_apply(a, &file),
        Command::Lexicon { command } => cmd_lexicon(command, &file),
        Command::Stats(a) => cmd_stats(a, &file),
        Command::Preprocess(a) => cmd_preprocess(a, &file),
        Command::Serve(a) => cmd_serve(a, &file),
    }
}

fn repro(cmd: &str, seed: u64, effective: &serde_json::Value) {
    eprintln!("repro: cmd={cmd} seed={seed} config=sha256:{}", config::digest(effective));
}

fn seed_of(file: &FileConfig) -> u64 {
    file.seed.unwrap_or(DEFAULT_SEED)
}

fn load_lexicon(path: Option<&Path>) -> Result<MorphLexicon> {
    match path {
        Some(p) => MorphLexicon::load(p).with_context(|| format!("loading lexicon {}", p.display())),
        None => {
            log::info!("using the built-in lexicon");
            Ok(fixture_lexicon())
        }
    }
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Ok(Corpus::load(path, LoadMode::Strict)?.corpus)
}

/// Paths and settings for resolution after merging flags over the config file.
struct ResolverSetup {
    lexicon: Option<PathBuf>,
    config: ResolverConfig,
    backend_file: Option<PathBuf>,
    backend_url: Option<String>,
    timeout: Duration,
    retries: u32,
    parallelism: usize,
}

impl ResolverSetup {
    fn merge(a: &ResolverArgs, file: &FileConfig) -> Result<Self> {
        let mut config = file.resolver.clone().unwrap_or_default();
        if let Some(m) = a.mode {
            config.mode = m;
        }
        if let Some(t) = a.threshold {
            config.threshold = t;
        }
        if let Some(n) = a.max_fillers {
            config.max_fillers = n;
        }
        if let Some(f) = &a.fillers {
            config.fillers = f.clone();
        }
        if a.toned {
            config.tone_neutral = false;
        }
        config.validate().map_err(|e| usage(e.to_string()))?;
        let setup = ResolverSetup {
            lexicon: a.lexicon.clone().or_else(|| file.lexicon.clone()),
            config,
            backend_file: a.backend_file.clone().or_else(|| file.backend.file.clone()),
            backend_url: a.backend_url.clone().or_else(|| file.backend.url.clone()),
            timeout: Duration::from_secs(file.backend.timeout_secs.unwrap_or(30)),
            retries: file.backend.retries.unwrap_or(2),
            parallelism: a.backend_parallelism.or(file.backend.parallelism).unwrap_or(4),
        };
        if let Some(p) = &setup.lexicon {
            need_file(p)?;
        }
        if let Some(p) = &setup.backend_file {
            need_file(p)?;
        }
        if setup.config.mode == ResolveMode::Backend && setup.backend_file.is_none() && setup.backend_url.is_none() {
            return Err(usage("backend mode needs --backend-file or --backend-url"));
        }
        Ok(setup)
    }

    fn effective(&self) -> serde_json::Value {
        json!({
            "resolver": self.config,
            "backend_file": self.backend_file,
            "backend_url": self.backend_url,
            "parallelism": self.parallelism,
        })
    }

    fn backend(&self) -> Result<Option<Arc<dyn PredictionBackend>>> {
        if self.config.mode != ResolveMode::Backend {
            return Ok(None);
        }
        if let Some(p) = &self.backend_file {
            return Ok(Some(Arc::new(FileBackend::load(p)?)));
        }
        let url = self.backend_url.clone().expect("checked in merge");
        Ok(Some(Arc::new(HttpBackend::new(url, self.timeout, self.retries)?)))
    }

    fn build(&self) -> Result<Resolver> {
        let lexicon = Arc::new(load_lexicon(self.lexicon.as_deref())?);
        let mut r = Resolver::new(lexicon, self.config.clone())?;
        if let Some(b) = self.backend()? {
            r = r.with_backend(b);
        }
        Ok(r)
    }
}

/// Resolves `(id, text)` pairs in the configured mode.
fn resolve_all(setup: &ResolverSetup, resolver: &Resolver, samples: &[(String, String)]) -> Result<Vec<Resolution>> {
    match setup.backend()? {
        Some(b) => Ok(resolve_batch(samples, b.as_ref(), setup.parallelism)?),
        None => Ok(samples.iter().map(|(_, t)| resolver.resolve(t)).collect()),
    }
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(io::BufWriter::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_resolve(a: ResolveArgs, file: &FileConfig) -> Result<ExitCode> {
    let setup = ResolverSetup::merge(&a.resolver, file)?;
    if let Some(p) = &a.input {
        need_file(p)?;
    }
    repro("resolve", seed_of(file), &setup.effective());
    let resolver = setup.build()?;

    if let Some(text) = &a.text {
        let res = resolve_all(&setup, &resolver, &[("cli".into(), text.clone())])?.remove(0);
        let mut out = output_writer(a.output.as_deref())?;
        if a.json {
            writeln!(out, "{}", serde_json::to_string(&res)?)?;
        } else {
            writeln!(out, "{}", res.output)?;
        }
        out.flush()?;
        return Ok(ExitCode::SUCCESS);
    }

    let corpus = load_corpus(a.input.as_deref().expect("clap requires input or text"))?;
    let samples: Vec<(String, String)> =
        corpus.records.iter().filter(|r| a.split.is_none_or(|s| r.split == s)).map(|r| (r.id.clone(), r.source.clone())).collect();
    let resolutions = resolve_all(&setup, &resolver, &samples)?;
    let mut out = output_writer(a.output.as_deref())?;
    let mut changed = 0;
    for ((id, _), r) in samples.iter().zip(resolutions) {
        changed += usize::from(!r.spans.is_empty());
        serde_json::to_writer(&mut out, &Prediction::from_resolution(id.clone(), r))?;
        writeln!(out)?;
    }
    out.flush()?;
    log::info!("resolved {} records, {changed} changed", samples.len());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    id: String,
    label: i64,
}

fn cmd_eval(a: EvalArgs, file: &FileConfig) -> Result<ExitCode> {
    need_file(&a.gold)?;
    need_file(&a.predictions)?;
    if let Some(p) = &a.lexicon {
        need_file(p)?;
    }
    let opts = EvalOptions { fp_on_bad_edit: a.fp_on_bad_edit || file.eval.fp_on_bad_edit.unwrap_or(false) };
    repro("eval", seed_of(file), &json!({"options": opts, "split": a.split.map(|s| s.name()), "classes": a.classes}));

    if a.classes {
        let gold: Vec<LabelRow> = read_jsonl(&a.gold).with_context(|| format!("reading {}", a.gold.display()))?;
        let pred: Vec<LabelRow> = read_jsonl(&a.predictions).with_context(|| format!("reading {}", a.predictions.display()))?;
        let pairs = |rows: Vec<LabelRow>| rows.into_iter().map(|r| (r.id, r.label)).collect::<Vec<_>>();
        let report = class_report(&pairs(gold), &pairs(pred))?;
        print!("{}", report.render());
        if let Some(o) = &a.output {
            write_atomic(o, &serde_json::to_vec_pretty(&report)?)?;
        }
        return Ok(ExitCode::SUCCESS);
    }

    let corpus = load_corpus(&a.gold)?;
    let lexicon = a.lexicon.as_deref().map(|p| load_lexicon(Some(p))).transpose()?;
    let samples: Vec<EvalSample> = corpus
        .records
        .iter()
        .filter(|r| a.split.is_none_or(|s| r.split == s))
        .map(|r| EvalSample::from_pair(r, lexicon.as_ref()))
        .collect();
    let predictions: Vec<Prediction> = read_jsonl(&a.predictions).with_context(|| format!("reading {}", a.predictions.display()))?;
    let wanted: std::collections::HashSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    let predictions: Vec<Prediction> = predictions.into_iter().filter(|p| wanted.contains(p.id.as_str())).collect();
    let report = evaluate_with(&samples, &predictions, opts)?;
    print!("{}", report.render());
    if let Some(o) = &a.output {
        write_atomic(o, &serde_json::to_vec_pretty(&report)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(a: CompareArgs, file: &FileConfig) -> Result<ExitCode> {
    let mut named = Vec::new();
    for spec in &a.reports {
        let (label, path) = spec.split_once('=').ok_or_else(|| usage(format!("`{spec}`: expected SYSTEM:TEST_SET=PATH")))?;
        let (system, test_set) = label.split_once(':').ok_or_else(|| usage(format!("`{spec}`: expected SYSTEM:TEST_SET=PATH")))?;
        let path = PathBuf::from(path);
        need_file(&path)?;
        named.push((system.to_string(), test_set.to_string(), path));
    }
    repro("compare", seed_of(file), &json!({"reports": a.reports}));
    let reports = named
        .into_iter()
        .map(|(system, test_set, path)| {
            let text = std::fs::read_to_string(&path)?;
            let report: EvalReport = serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))?;
            Ok(NamedReport { system, test_set, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = compare(&reports);
    print!("{}", table.render());
    if let Some(o) = &a.output {
        write_atomic(o, &serde_json::to_vec_pretty(&table)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_augment(a: AugmentArgs, file: &FileConfig) -> Result<ExitCode> {
    let lexicon_path = a.lexicon.clone().or_else(|| file.lexicon.clone());
    if let Some(p) = &lexicon_path {
        need_file(p)?;
    }
    if let Some(p) = &a.train {
        need_file(p)?;
    }
    let mut cfg = file.augment.clone().unwrap_or_default();
    cfg.seed = a.seed.or(file.seed).unwrap_or(cfg.seed);
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(d) = a.draws {
        cfg.targets = Targets::Sampled { draws: d };
    }
    if a.no_negatives {
        cfg.keep_original_as_negative = false;
    }
    if let Some(t) = a.temperature {
        cfg.temperature = t;
    }
    if let Some(r) = a.retry_budget {
        cfg.retry_budget = r;
    }
    if let Some(m) = a.max_in_flight {
        cfg.max_in_flight = m;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if matches!(cfg.targets, Targets::Sampled { .. }) && a.train.is_none() {
        return Err(usage("--draws needs --train"));
    }
    repro("augment", cfg.seed, &json!({ "augment": cfg }));

    let lexicon = load_lexicon(lexicon_path.as_deref())?;
    let train: Vec<_> = match &a.train {
        Some(p) => load_corpus(p)?.records.into_iter().filter(|r| r.split == Split::Train).collect(),
        None => Vec::new(),
    };
    let generator: Box<dyn SentenceGenerator> = match cfg.mode {
        GenMode::Offline => Box::new(OfflineGenerator { seed: cfg.seed }),
        GenMode::Llm => Box::new(HttpGenerator::from_env(cfg.temperature)?),
    };
    let out = run_augmentation(&train, &lexicon, &cfg, generator.as_ref())?;
    out.corpus.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    let m = &out.manifest;
    eprintln!("augment: {} positives ({} expected), {} negatives, {} skipped sentences", m.positives, m.expected_positives, m.negatives, m.skipped_sentences);
    if let Some(p) = &a.manifest {
        write_atomic(p, &serde_json::to_vec_pretty(m)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_filter(a: FilterArgs, file: &FileConfig) -> Result<ExitCode> {
    need_file(&a.corpus)?;
    let setup = ResolverSetup::merge(&a.resolver, file)?;
    repro("filter", seed_of(file), &setup.effective());
    let resolver = setup.build()?;
    let corpus = load_corpus(&a.corpus)?;
    let items = collaborative_filter(&corpus, &resolver)?;
    write_jsonl(&a.output, &items)?;
    let mut by_reason = std::collections::BTreeMap::new();
    for i in &items {
        *by_reason.entry(format!("{:?}", i.reason)).or_insert(0usize) += 1;
    }
    eprintln!("filter: {} of {} records queued {:?}", items.len(), corpus.len(), by_reason);
    Ok(ExitCode::SUCCESS)
}

fn cmd_apply(a: ApplyArgs, file: &FileConfig) -> Result<ExitCode> {
    for p in [&a.corpus, &a.lexicon, &a.queue, &a.decisions] {
        need_file(p)?;
    }
    repro("apply", seed_of(file), &json!({}));
    let corpus = load_corpus(&a.corpus)?;
    let lexicon = load_lexicon(Some(&a.lexicon))?;
    let queue: Vec<ReviewItem> = read_jsonl(&a.queue).with_context(|| format!("reading {}", a.queue.display()))?;
    let decisions: Vec<Decision> = read_jsonl(&a.decisions).with_context(|| format!("reading {}", a.decisions.display()))?;
    let mut state = ReviewState::new(corpus, lexicon, queue);
    let log: Vec<AuditEntry> = apply_decisions(&mut state, &decisions)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let bytes = morph_service::StoreBytes::of(&state);
    write_atomic(&a.out_dir.join("corpus.jsonl"), &bytes.corpus)?;
    write_atomic(&a.out_dir.join("lexicon.tsv"), &bytes.lexicon)?;
    write_atomic(&a.out_dir.join("queue.jsonl"), &bytes.queue)?;
    write_jsonl(&a.out_dir.join("audit.jsonl"), &log)?;
    eprintln!("apply: {} decisions applied", log.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_lexicon(c: LexiconCommand, file: &FileConfig) -> Result<ExitCode> {
    match c {
        LexiconCommand::Validate { lexicon, strict } => {
            let path = lexicon.or_else(|| file.lexicon.clone());
            if let Some(p) = &path {
                need_file(p)?;
            }
            repro("lexicon validate", seed_of(file), &json!({"strict": strict}));
            let lex = load_lexicon(path.as_deref())?;
            let warnings = validate_lexicon(&lex, PhoneticsTable::builtin());
            for w in &warnings {
                println!("warning: {w}");
            }
            println!("{} originals, {} variants, {} warnings", lex.entries().len(), lex.variant_count(), warnings.len());
            Ok(if strict && !warnings.is_empty() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        LexiconCommand::Stats { lexicon } => {
            let path = lexicon.or_else(|| file.lexicon.clone());
            if let Some(p) = &path {
                need_file(p)?;
            }
            repro("lexicon stats", seed_of(file), &json!({}));
            let lex = load_lexicon(path.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&lex.stats())?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_stats(a: StatsArgs, file: &FileConfig) -> Result<ExitCode> {
    need_file(&a.corpus)?;
    repro("stats", seed_of(file), &json!({"lenient": a.lenient}));
    let mode = if a.lenient { LoadMode::Lenient } else { LoadMode::Strict };
    let report = Corpus::load(&a.corpus, mode)?;
    let out = json!({
        "stats": report.corpus.stats(),
        "split_check": split_check(&report.corpus),
        "quarantined": report.quarantined,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_preprocess(a: PreprocessArgs, file: &FileConfig) -> Result<ExitCode> {
    need_file(&a.input)?;
    let setup = ResolverSetup::merge(&a.resolver, file)?;
    if setup.config.mode == ResolveMode::Backend {
        return Err(usage("preprocess resolves locally; use --mode dict or full"));
    }
    repro("preprocess", seed_of(file), &setup.effective());
    let resolver = setup.build()?;
    let records: Vec<ClassificationRecord> = read_jsonl(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    if let Some(bad) = records.iter().find(|r| r.label > 2) {
        bail!("{}: record `{}` has label {}; expected 0, 1 or 2", a.input.display(), bad.id, bad.label);
    }
    write_jsonl(&a.output, &preprocess_for_classification(&records, &resolver))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(a: ServeArgs, file: &FileConfig) -> Result<ExitCode> {
    let s = &file.serve;
    let store_dir = a.store.clone().or_else(|| s.store.clone()).ok_or_else(|| usage("--store is required"))?;
    let host = a.host.clone().or_else(|| s.host.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.or(s.port).unwrap_or(8080);
    let readonly = a.readonly || s.readonly.unwrap_or(false);
    let ui_dir = a.ui_dir.clone().or_else(|| s.ui_dir.clone());
    let resolver = file.resolver.clone().unwrap_or_default();
    if let Some(p) = &a.init_corpus {
        need_file(p)?;
    }
    if let Some(p) = &a.init_lexicon {
        need_file(p)?;
    }
    if let Some(d) = &ui_dir {
        if !d.is_dir() {
            return Err(usage(format!("{}: not a directory", d.display())));
        }
    }
    if a.init_corpus.is_none() && !Store::exists(&store_dir) {
        return Err(usage(format!("{}: no store; seed one with --init-corpus and --init-lexicon", store_dir.display())));
    }
    repro("serve", seed_of(file), &json!({"resolver": resolver, "readonly": readonly, "port": port, "host": host}));

    if let (Some(c), Some(l)) = (&a.init_corpus, &a.init_lexicon) {
        let corpus = load_corpus(c)?;
        let lexicon = load_lexicon(Some(l))?;
        let r = Resolver::new(Arc::new(lexicon.clone()), resolver.clone())?;
        let queue = collaborative_filter(&corpus, &r)?;
        eprintln!("serve: seeding {} with {} review items", store_dir.display(), queue.len());
        drop(Store::create(&store_dir, &ReviewState::new(corpus, lexicon, queue))?);
    }
    let store = Store::open(&store_dir, readonly)?;
    let config = ServiceConfig { token: a.token.clone().or_else(|| s.token.clone()), ui_dir, resolver };
    let app = morph_service::router(AppState::new(store, config));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await.with_context(|| format!("binding {host}:{port}"))?;
        eprintln!("serve: http://{}", listener.local_addr()?);
        morph_service::serve(listener, app).await?;
        anyhow::Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}
