mod grid;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use csembed::augment::{
    self, AugmentConfig, BackendConfigError, DictionaryBackend, HttpBackend, HttpConfig, OnTranslationFailure,
    TranslationBackend, TreeIndex,
};
use csembed::corpus::{self, CorpusError, Format, PairRecord, SixTuple, SplitSpec};
use csembed::encoder::{EncoderError, EncoderParams, Vocab};
use csembed::eval::{self, EvalError, EvalReport, Scenario};
use csembed::synthetic::{self, SyntheticConfig};
use csembed::trainer::{self, RunConfig, TrainConfig, TrainError};
use csembed::treebank::SelectionPolicy;

use grid::{AblationRow, Grid};
use manifest::RunManifest;

const KEY_ENV: &str = "CSEMBED_TRANSLATE_KEY";

#[derive(Parser)]
#[command(name = "csembed", version, about = "Code-switched data augmentation and sentence-embedding training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add code-switched sentences to pairs or NLI triplets.
    Augment(AugmentArgs),
    /// Turn labeled NLI rows into (premise, entailment, contradiction) triplets.
    BuildNli(BuildNliArgs),
    /// Shuffle and split a record file by ratios.
    Split(SplitArgs),
    /// Build a vocabulary file from training data.
    BuildVocab(BuildVocabArgs),
    /// Write a synthetic bilingual task.
    Synth(SynthArgs),
    /// Train an encoder on six-sentence records.
    Train(TrainArgs),
    /// Evaluate a trained encoder on scored pairs.
    Eval(EvalArgs),
    /// Train and evaluate across the EN2EN/EN2CS/CS2CS scenarios.
    Scenarios(ScenariosArgs),
    /// Run loss ablation grids.
    Ablate(AblateArgs),
    /// Compare two sets of per-seed results.
    Ttest(TtestArgs),
}

#[derive(Args, Serialize)]
struct AugmentArgs {
    /// Bracketed parse trees, one per line.
    #[arg(long)]
    trees: PathBuf,
    /// Pair records (TSV or JSONL).
    #[arg(long, conflicts_with = "triplets", required_unless_present = "triplets")]
    pairs: Option<PathBuf>,
    /// NLI triplets (JSONL).
    #[arg(long)]
    triplets: Option<PathBuf>,
    /// Phrase dictionary TSV.
    #[arg(long, conflicts_with = "http", required_unless_present = "http")]
    dict: Option<PathBuf>,
    /// JSON file describing a translation endpoint; the key is read from
    /// CSEMBED_TRANSLATE_KEY.
    #[arg(long)]
    http: Option<PathBuf>,
    /// Persistent cache for remote translations.
    #[arg(long, requires = "http")]
    http_cache: Option<PathBuf>,
    /// Maximum number of noun phrases switched per sentence.
    #[arg(long)]
    max_spans: Option<usize>,
    /// Switch only the first eligible noun phrase.
    #[arg(long)]
    single: bool,
    #[arg(long, default_value = "en")]
    source_lang: String,
    #[arg(long, default_value = "ko")]
    target_lang: String,
    /// Keep untranslatable phrases instead of rejecting the record.
    #[arg(long)]
    keep_original: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BuildNliArgs {
    /// Rows with premise, hypothesis and label (TSV or JSONL).
    #[arg(long)]
    rows: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated ratios summing to 1, e.g. 0.64,0.16,0.20.
    #[arg(long, default_value = "0.64,0.16,0.20")]
    ratios: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Files are written as PREFIX.{train,dev,test}.EXT for three parts and
    /// PREFIX.partK.EXT otherwise.
    #[arg(long)]
    out_prefix: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BuildVocabArgs {
    /// Six-sentence JSONL files.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long)]
    cased: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    concepts: usize,
    #[arg(long, default_value_t = 500)]
    train_size: usize,
    #[arg(long, default_value_t = 100)]
    eval_size: usize,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Six-sentence JSONL.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Run config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset used as the base config: desk, mbert-base, xlmr-base, xlmr-large.
    #[arg(long)]
    preset: Option<String>,
    /// Loss variant v1..v6 or simcse, overriding the config's loss switches.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint output.
    #[arg(long)]
    out: PathBuf,
    /// Step history JSONL; defaults to OUT.history.jsonl.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    cased: bool,
    /// Scored pair files; several files are pooled into one correlation.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// EN2EN evaluates original sentences; EN2CS and CS2CS evaluate the
    /// code-switched ones.
    #[arg(long, default_value = "EN2EN")]
    scenario: String,
    #[arg(long, default_value = "sts")]
    task: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ScenariosArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "EN2EN,EN2CS,CS2CS")]
    scenarios: String,
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AblateArgs {
    #[arg(long)]
    train: PathBuf,
    /// Scored pairs with code-switched fields.
    #[arg(long)]
    eval: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// `tables` for the standard sweeps, or `variant=..;tau=..;lambda=..;alpha=..`.
    /// May be repeated.
    #[arg(long, default_value = "tables")]
    grid: Vec<String>,
    #[arg(long, default_value = "0")]
    seeds: String,
    /// Evaluate on original (en) or code-switched (cs) sentences.
    #[arg(long, default_value = "cs")]
    view: String,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TtestArgs {
    /// One value per line, or report JSONL with task and value fields.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Pair values by position instead of Welch's unpaired test.
    #[arg(long)]
    paired: bool,
    /// Also write the summary TSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Config,
    Io,
    Internal,
}

struct Failure {
    kind: Kind,
    error: anyhow::Error,
}

impl Failure {
    fn code(&self) -> u8 {
        match self.kind {
            Kind::Config => 2,
            Kind::Io => 3,
            Kind::Internal => 4,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

trait Classify<T> {
    fn kind(self, kind: Kind) -> CliResult<T>;
    fn config(self) -> CliResult<T>
    where
        Self: Sized,
    {
        self.kind(Kind::Config)
    }
    fn io(self) -> CliResult<T>
    where
        Self: Sized,
    {
        self.kind(Kind::Io)
    }
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn kind(self, kind: Kind) -> CliResult<T> {
        self.map_err(|e| Failure { kind, error: e.into() })
    }
}

fn corpus_kind(e: &CorpusError) -> Kind {
    match e {
        CorpusError::Io { .. } => Kind::Io,
        _ => Kind::Config,
    }
}

fn encoder_kind(e: &EncoderError) -> Kind {
    match e {
        EncoderError::Io { .. } => Kind::Io,
        EncoderError::Vocab(_) | EncoderError::Checkpoint(_) | EncoderError::EmptyText => Kind::Config,
        _ => Kind::Internal,
    }
}

fn train_kind(e: &TrainError) -> Kind {
    match e {
        TrainError::Config(_) | TrainError::EmptyTrainingSet => Kind::Config,
        TrainError::Loss(csembed::concse::LossError::Config(_)) => Kind::Config,
        TrainError::Encoder(e) => encoder_kind(e),
        _ => Kind::Internal,
    }
}

fn eval_kind(e: &EvalError) -> Kind {
    match e {
        EvalError::Encoder(e) => encoder_kind(e),
        EvalError::Train(e) => train_kind(e),
        EvalError::MissingCs(_)
        | EvalError::NotScored(_)
        | EvalError::EmptyPairs
        | EvalError::UnknownScenario(_)
        | EvalError::ConstantInput
        | EvalError::TooFew(_)
        | EvalError::LengthMismatch(..)
        | EvalError::DegenerateVariance => Kind::Config,
        _ => Kind::Internal,
    }
}

fn corpus<T>(r: Result<T, CorpusError>) -> CliResult<T> {
    r.map_err(|e| Failure {
        kind: corpus_kind(&e),
        error: e.into(),
    })
}

fn encoder<T>(r: Result<T, EncoderError>) -> CliResult<T> {
    r.map_err(|e| Failure {
        kind: encoder_kind(&e),
        error: e.into(),
    })
}

fn train_err<T>(r: Result<T, TrainError>) -> CliResult<T> {
    r.map_err(|e| Failure {
        kind: train_kind(&e),
        error: e.into(),
    })
}

fn eval_err<T>(r: Result<T, EvalError>) -> CliResult<T> {
    r.map_err(|e| Failure {
        kind: eval_kind(&e),
        error: e.into(),
    })
}

fn warn_rows(path: &Path, errors: &[corpus::RowError]) {
    for e in errors {
        eprintln!("warning: {}:{}: skipped row: {}", path.display(), e.line, e.message);
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .io()
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .io()
}

fn finish(mut m: RunManifest, inputs: &[&Path], outputs: &[&Path], explicit: &Option<PathBuf>) -> CliResult<()> {
    for p in inputs {
        m.input(p).with_context(|| format!("hashing {}", p.display())).io()?;
    }
    for p in outputs {
        m.output(p);
    }
    let path = explicit.clone().unwrap_or_else(|| manifest::default_path(outputs[0]));
    m.write(&path)
        .with_context(|| format!("writing {}", path.display()))
        .io()
}

fn jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
        .collect()
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| anyhow!("invalid {what} '{s}'")))
        .collect::<Result<Vec<_>, _>>()
        .config()
}

fn load_run_config(path: &Option<PathBuf>, preset: Option<&str>) -> CliResult<RunConfig> {
    match (path, preset) {
        (Some(p), _) => train_err(RunConfig::parse(&read_text(p)?)),
        (None, Some(name)) => TrainConfig::preset(name)
            .map(|c| RunConfig::from(&c))
            .ok_or_else(|| anyhow!("unknown preset '{name}'"))
            .config(),
        (None, None) => Ok(RunConfig::default()),
    }
}

fn load_vocab(path: &Path, lowercase: bool) -> CliResult<Vocab> {
    encoder(Vocab::load(path, lowercase))
}

fn load_six(path: &Path) -> CliResult<Vec<SixTuple>> {
    let loaded = corpus(corpus::read_six_tuples(path))?;
    warn_rows(path, &loaded.errors);
    Ok(loaded.records)
}

fn load_pairs(path: &Path) -> CliResult<Vec<PairRecord>> {
    let loaded = corpus(corpus::read_pairs(path, Format::from_path(path)))?;
    warn_rows(path, &loaded.errors);
    Ok(loaded.records)
}

fn cmd_augment(args: &AugmentArgs) -> CliResult<()> {
    let trees_text = read_text(&args.trees)?;
    let trees = TreeIndex::parse(&trees_text);
    for (line, e) in &trees.malformed {
        eprintln!("warning: {}:{line}: {e}", args.trees.display());
    }
    let backend_err = |e: BackendConfigError| {
        let kind = if matches!(e, BackendConfigError::Io { .. }) { Kind::Io } else { Kind::Config };
        Failure { kind, error: e.into() }
    };
    let backend: Box<dyn TranslationBackend> = match (&args.dict, &args.http) {
        (Some(d), _) => Box::new(DictionaryBackend::open(d).map_err(backend_err)?),
        (None, Some(h)) => {
            let cfg: HttpConfig = serde_json::from_str(&read_text(h)?)
                .with_context(|| format!("parsing {}", h.display()))
                .config()?;
            let key = std::env::var(KEY_ENV).ok();
            Box::new(HttpBackend::new(cfg, key, args.http_cache.as_deref()).map_err(backend_err)?)
        }
        (None, None) => return Err(anyhow!("either --dict or --http is required")).config(),
    };
    let policy = SelectionPolicy {
        max_spans: if args.single { Some(1) } else { args.max_spans },
    };
    let config = AugmentConfig {
        source_lang: args.source_lang.clone(),
        target_lang: args.target_lang.clone(),
        policy,
        on_failure: if args.keep_original {
            OnTranslationFailure::KeepOriginal
        } else {
            OnTranslationFailure::Reject
        },
    };
    let (input, report) = if let Some(p) = &args.pairs {
        let records = load_pairs(p)?;
        let (out, report) = augment::augment_pairs(&records, &trees, backend.as_ref(), &config);
        corpus(corpus::write_pairs(&out, &args.out, Format::from_path(&args.out)))?;
        (p, report)
    } else {
        let p = args.triplets.as_ref().expect("clap enforces pairs or triplets");
        let loaded = corpus(corpus::read_triplets(p))?;
        warn_rows(p, &loaded.errors);
        let (out, report) = augment::augment_triplets(&loaded.records, &trees, backend.as_ref(), &config);
        corpus(corpus::write_jsonl(&out, &args.out))?;
        (p, report)
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_text(&args.report, &text)?;
    eprintln!(
        "augmented {}/{} records ({} rejected, {} translation failures)",
        report.accepted,
        report.total,
        report.rejected(),
        report.translation_failures
    );
    let mut inputs: Vec<&Path> = vec![&args.trees, input];
    if let Some(d) = &args.dict {
        inputs.push(d);
    }
    finish(
        RunManifest::new("augment", args, None),
        &inputs,
        &[&args.out, &args.report],
        &args.manifest,
    )
}

fn cmd_build_nli(args: &BuildNliArgs) -> CliResult<()> {
    let loaded = corpus(corpus::read_nli_rows(&args.rows, Format::from_path(&args.rows)))?;
    warn_rows(&args.rows, &loaded.errors);
    let triplets = corpus(corpus::reconstruct_nli(&loaded.records))?;
    corpus(corpus::write_jsonl(&triplets, &args.out))?;
    eprintln!("{} rows -> {} triplets", loaded.records.len(), triplets.len());
    finish(RunManifest::new("build-nli", args, None), &[&args.rows], &[&args.out], &args.manifest)
}

fn cmd_split(args: &SplitArgs) -> CliResult<()> {
    let ratios: Vec<f64> = parse_list(&args.ratios, "ratio")?;
    let spec = corpus(SplitSpec::new(ratios, args.seed))?;
    let text = read_text(&args.input)?;
    let is_tsv = Format::from_path(&args.input) == Format::Tsv;
    let mut lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let header = if is_tsv && !lines.is_empty() {
        Some(lines.remove(0))
    } else {
        None
    };
    let parts = corpus(corpus::split(lines, &spec))?;
    let ext = args.input.extension().and_then(|e| e.to_str()).unwrap_or("jsonl");
    let names: Vec<String> = if parts.len() == 3 {
        ["train", "dev", "test"].iter().map(|s| s.to_string()).collect()
    } else {
        (0..parts.len()).map(|i| format!("part{i}")).collect()
    };
    let mut outputs = Vec::new();
    for (name, part) in names.iter().zip(&parts) {
        let mut path = args.out_prefix.as_os_str().to_os_string();
        path.push(format!(".{name}.{ext}"));
        let path = PathBuf::from(path);
        let mut body = String::new();
        if let Some(h) = header {
            body.push_str(h);
            body.push('\n');
        }
        for l in part {
            body.push_str(l);
            body.push('\n');
        }
        write_text(&path, &body)?;
        eprintln!("{}: {} records", path.display(), part.len());
        outputs.push(path);
    }
    let outs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    let manifest = args
        .manifest
        .clone()
        .or_else(|| Some(manifest::default_path(&args.out_prefix)));
    finish(RunManifest::new("split", args, Some(args.seed)), &[&args.input], &outs, &manifest)
}

fn cmd_build_vocab(args: &BuildVocabArgs) -> CliResult<()> {
    let mut records = Vec::new();
    for p in &args.data {
        records.extend(load_six(p)?);
    }
    let vocab = Vocab::build(records.iter().flat_map(|r| r.sentences()), !args.cased, args.min_count);
    write_text(&args.out, &vocab.to_file_string())?;
    let inputs: Vec<&Path> = args.data.iter().map(PathBuf::as_path).collect();
    finish(RunManifest::new("build-vocab", args, None), &inputs, &[&args.out], &args.manifest)
}

fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let cfg = SyntheticConfig {
        concepts: args.concepts,
        train_size: args.train_size,
        eval_size: args.eval_size,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    if cfg.concepts < 2 * cfg.sentence_len {
        return Err(anyhow!("--concepts must be at least {}", 2 * cfg.sentence_len)).config();
    }
    let task = synthetic::generate(&cfg);
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .io()?;
    let train = args.out_dir.join("train.jsonl");
    let eval = args.out_dir.join("eval.jsonl");
    let vocab = args.out_dir.join("vocab.txt");
    corpus(corpus::write_jsonl(&task.train, &train))?;
    corpus(corpus::write_pairs(&task.eval, &eval, Format::Jsonl))?;
    write_text(&vocab, &task.vocab.to_file_string())?;
    let manifest = args.manifest.clone().or_else(|| Some(args.out_dir.join("manifest.json")));
    finish(
        RunManifest::new("synth", args, Some(args.seed)),
        &[],
        &[&train, &eval, &vocab],
        &manifest,
    )
}

fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let mut run = load_run_config(&args.config, args.preset.as_deref())?;
    if let Some(v) = &args.variant {
        let loss = if v.eq_ignore_ascii_case("simcse") {
            csembed::concse::LossConfig::simcse()
        } else {
            csembed::concse::LossConfig::variant(v).config()?
        };
        let base = run.loss_config();
        run.set_loss(&csembed::concse::LossConfig {
            tau: base.tau,
            lambda: base.lambda,
            alpha: base.alpha,
            neg_mode: base.neg_mode,
            ..loss
        });
    }
    if let Some(s) = args.seed {
        run.seed = s;
    }
    let cfg = train_err(run.train_config())?;
    let vocab = load_vocab(&args.vocab, run.lowercase)?;
    let records = load_six(&args.data)?;
    let (params, history) = train_err(trainer::train(&records, &vocab, &cfg, None))?;
    encoder(params.save(&args.out))?;
    let history_path = args.history.clone().unwrap_or_else(|| {
        let mut p = args.out.as_os_str().to_os_string();
        p.push(".history.jsonl");
        PathBuf::from(p)
    });
    write_text(&history_path, &history.to_jsonl())?;
    if let (Some(first), Some(last)) = (history.steps.first(), history.steps.last()) {
        eprintln!("{} steps, loss {:.4} -> {:.4}", history.steps.len(), first.total, last.total);
    }
    #[derive(Serialize)]
    struct Snapshot<'a> {
        args: &'a TrainArgs,
        resolved: &'a RunConfig,
    }
    let mut inputs: Vec<&Path> = vec![&args.data, &args.vocab];
    if let Some(c) = &args.config {
        inputs.push(c);
    }
    finish(
        RunManifest::new("train", &Snapshot { args, resolved: &run }, Some(run.seed)),
        &inputs,
        &[&args.out, &history_path],
        &args.manifest,
    )
}

fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let scenario: Scenario = eval_err(args.scenario.parse())?;
    let params = encoder(EncoderParams::load(&args.params))?;
    let vocab = load_vocab(&args.vocab, !args.cased)?;
    let mut subsets = Vec::new();
    for p in &args.data {
        let name = p.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
        subsets.push((name, load_pairs(p)?));
    }
    let mut report = eval_err(eval::evaluate_sts_all(
        &params,
        &vocab,
        &args.task,
        &subsets,
        scenario.eval_view(),
    ))?;
    report.scenario = Some(scenario);
    write_text(&args.out, &jsonl(&[&report]))?;
    println!("{}\t{}\tspearman\t{:.6}\tn={}", scenario, args.task, report.value, report.n);
    let mut inputs: Vec<&Path> = vec![&args.params, &args.vocab];
    inputs.extend(args.data.iter().map(PathBuf::as_path));
    finish(RunManifest::new("eval", args, None), &inputs, &[&args.out], &args.manifest)
}

fn cmd_scenarios(args: &ScenariosArgs) -> CliResult<()> {
    let run = load_run_config(&args.config, None)?;
    let cfg = train_err(run.train_config())?;
    let scenarios: Vec<Scenario> = args
        .scenarios
        .split(',')
        .map(|s| eval_err(s.trim().parse()))
        .collect::<CliResult<_>>()?;
    let seeds: Vec<u64> = parse_list(&args.seeds, "seed")?;
    let vocab = load_vocab(&args.vocab, run.lowercase)?;
    let train = load_six(&args.train)?;
    let mut sets = Vec::new();
    for p in &args.data {
        let name = p.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
        sets.push((name, load_pairs(p)?));
    }
    let reports: Vec<EvalReport> = eval_err(eval::run_scenarios(&train, &sets, &vocab, &cfg, &scenarios, &seeds))?;
    write_text(&args.out, &jsonl(&reports))?;
    for r in &reports {
        println!(
            "{}\t{}\t{}\t{:.6}",
            r.scenario.map_or("-".into(), |s| s.to_string()),
            r.task,
            r.seed.unwrap_or_default(),
            r.value
        );
    }
    let mut inputs: Vec<&Path> = vec![&args.train, &args.vocab];
    inputs.extend(args.data.iter().map(PathBuf::as_path));
    finish(RunManifest::new("scenarios", args, None), &inputs, &[&args.out], &args.manifest)
}

fn cmd_ablate(args: &AblateArgs) -> CliResult<()> {
    let run = load_run_config(&args.config, None)?;
    let base = train_err(run.train_config())?;
    let seeds: Vec<u64> = parse_list(&args.seeds, "seed")?;
    let view = match args.view.to_ascii_lowercase().as_str() {
        "en" => eval::View::En,
        "cs" => eval::View::Cs,
        other => return Err(anyhow!("unknown view '{other}' (expected en or cs)")).config(),
    };
    let mut grids = Vec::new();
    for (i, g) in args.grid.iter().enumerate() {
        if g.trim() == "tables" {
            grids.extend(Grid::tables(&base.loss));
        } else {
            grids.push(Grid::parse(&format!("grid{i}"), g, &base.loss).config()?);
        }
    }
    let mut cells = Vec::new();
    for g in &grids {
        cells.extend(g.cells(&base.loss).config()?);
    }
    let vocab = load_vocab(&args.vocab, run.lowercase)?;
    let train = load_six(&args.train)?;
    let pairs = load_pairs(&args.eval)?;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(anyhow::Error::from)
        .kind(Kind::Internal)?;
    let results: Vec<CliResult<AblationRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, seed)| {
                let cell = &cells[c];
                let cfg = TrainConfig {
                    seed,
                    loss: cell.loss.clone(),
                    ..base.clone()
                };
                let (params, _) = train_err(trainer::train(&train, &vocab, &cfg, None))
                    .map_err(|f| Failure { error: f.error.context(format!("cell {cell}")), ..f })?;
                let report = eval_err(eval::evaluate_sts(&params, &vocab, "ablation", &pairs, view))?;
                Ok(AblationRow {
                    grid: cell.grid.clone(),
                    variant: cell.variant.clone(),
                    tau: cell.tau,
                    lambda: cell.lambda,
                    alpha: cell.alpha,
                    seed,
                    metric: report.metric,
                    value: report.value,
                })
            })
            .collect()
    });
    let rows: Vec<AblationRow> = results.into_iter().collect::<CliResult<_>>()?;
    write_text(&args.out, &jsonl(&rows))?;
    for r in &rows {
        let lambda = r.lambda.map_or("N/A".to_string(), |l| l.to_string());
        println!(
            "{}\t{}\ttau={}\tlambda={}\talpha={}\tseed={}\t{:.4}",
            r.grid, r.variant, r.tau, lambda, r.alpha, r.seed, r.value
        );
    }
    let mut inputs: Vec<&Path> = vec![&args.train, &args.eval, &args.vocab];
    if let Some(c) = &args.config {
        inputs.push(c);
    }
    finish(RunManifest::new("ablate", args, None), &inputs, &[&args.out], &args.manifest)
}

/// Values grouped by task; plain numeric lines go under "all".
fn read_results(path: &Path) -> CliResult<BTreeMap<String, Vec<f64>>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || anyhow!("{}:{}: expected a number or a JSON object with 'value'", path.display(), i + 1);
        if let Ok(v) = line.parse::<f64>() {
            out.entry("all".into()).or_default().push(v);
            continue;
        }
        let json: serde_json::Value = serde_json::from_str(line).map_err(|_| bad()).config()?;
        let v = json.get("value").and_then(|v| v.as_f64()).ok_or_else(bad).config()?;
        let task = json.get("task").and_then(|t| t.as_str()).unwrap_or("all");
        out.entry(task.to_string()).or_default().push(v);
    }
    Ok(out)
}

fn cmd_ttest(args: &TtestArgs) -> CliResult<()> {
    let a = read_results(&args.a)?;
    let b = read_results(&args.b)?;
    let mut tsv = String::from("task\tt\tdf\tp\n");
    let mut any = false;
    for (task, xs) in &a {
        let Some(ys) = b.get(task) else { continue };
        let r = if args.paired {
            eval::paired_ttest(xs, ys)
        } else {
            eval::welch_ttest(xs, ys)
        };
        let r = eval_err(r).map_err(|f| Failure { error: f.error.context(format!("task '{task}'")), ..f })?;
        tsv.push_str(&format!("{task}\t{}\t{}\t{}\n", r.t_statistic, r.df, r.p_value));
        any = true;
    }
    if !any {
        return Err(anyhow!("the two files share no task")).config();
    }
    print!("{tsv}");
    if let Some(out) = &args.out {
        write_text(out, &tsv)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Augment(a) => cmd_augment(a),
        Command::BuildNli(a) => cmd_build_nli(a),
        Command::Split(a) => cmd_split(a),
        Command::BuildVocab(a) => cmd_build_vocab(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Scenarios(a) => cmd_scenarios(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Ttest(a) => cmd_ttest(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code())
        }
    }
}
