//! `sukukata` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sukukata::alphabet::{build_alphabet, count_segments_in_words};
use sukukata::corpus::{count_word_units, join_units, normalize, pre_tokenize, Corpus, NormalizationConfig};
use sukukata::eval::{
    read_token_stream, render_segmentation_table, render_tokenization_table, report_from_stream,
    BpeSegmenter, EvalOptions, MetricsReport, Segmenter,
};
use sukukata::metrics::Smoothing;
use sukukata::{evaluate, train_tokenizer, Mode, SyllableRuleSet, TokenizerModel, TrainConfig};

#[derive(Parser)]
#[command(name = "sukukata", version, about = "Syllable-alphabet BPE tokenizers for Indonesian")]
struct Cli {
    /// JSON file with default option values; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for counting and evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hyphenate the syllables of each stdin line.
    Syllabify(SyllabifyArgs),
    /// Count syllables in a corpus and print the top-k alphabet as JSON.
    BuildAlphabet(BuildAlphabetArgs),
    /// Train a tokenizer model.
    Train(TrainArgs),
    /// Encode stdin lines with a model.
    Encode(EncodeArgs),
    /// Decode lines of space-separated ids.
    Decode(DecodeArgs),
    /// Evaluate a model, a plain segmentation or an external token stream.
    Eval(EvalArgs),
    /// Evaluate several models and print one merged table.
    Compare(CompareArgs),
}

#[derive(Args, Clone, Default)]
struct TextArgs {
    /// Lowercase during normalization (default true).
    #[arg(long, action = clap::ArgAction::Set)]
    lowercase: Option<bool>,
    /// Syllable rule set as JSON.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Treat word-final ai/au/oi as one nucleus.
    #[arg(long)]
    diphthongs: bool,
}

#[derive(Args)]
struct SyllabifyArgs {
    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args)]
struct BuildAlphabetArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Write the segment frequency table here as TSV.
    #[arg(long)]
    freq_out: Option<PathBuf>,
    /// Write the alphabet here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    k: Option<usize>,
    /// Vocabulary size to reach, excluding the two special tokens.
    #[arg(long = "vocab")]
    target_vocab: Option<usize>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frequency table (default: model path with `.freq.tsv`).
    #[arg(long)]
    freq_out: Option<PathBuf>,
    /// Training log (default: model path with `.log`).
    #[arg(long)]
    log_out: Option<PathBuf>,
    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Print token ids (the default).
    #[arg(long, conflicts_with = "pieces")]
    ids: bool,
    /// Print token texts instead of ids.
    #[arg(long)]
    pieces: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Syllable,
    Plain,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum SegmentationArg {
    Character,
    Syllable,
    Bpe,
}

#[derive(Clone, Copy, ValueEnum)]
enum SmoothingArg {
    None,
    AddOne,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Layout {
    Tokenization,
    Segmentation,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus the unigram is fit on.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Corpora to score (repeatable; default: the training corpus).
    #[arg(long = "eval")]
    eval: Vec<PathBuf>,
    #[arg(long, conflicts_with_all = ["segmentation", "stream"])]
    model: Option<PathBuf>,
    /// Evaluate a segmentation built from the training corpus.
    #[arg(long, value_enum, conflicts_with = "stream")]
    segmentation: Option<SegmentationArg>,
    /// Syllable alphabet size for --segmentation syllable|bpe.
    #[arg(long)]
    k: Option<usize>,
    /// BPE vocabulary for --segmentation bpe (default: the syllable alphabet size for k).
    #[arg(long = "vocab")]
    target_vocab: Option<usize>,
    /// External token stream, JSON Lines of {"tokens": [...], "char_count": N}.
    #[arg(long)]
    stream: Option<PathBuf>,
    /// Vocabulary size of the tokenizer behind --stream.
    #[arg(long, requires = "stream")]
    vocab_size: Option<usize>,
    /// Column name for the --stream corpus (default: the stream file stem).
    #[arg(long, requires = "stream")]
    corpus_id: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the smoothing choice (none on the training corpus, add-one elsewhere).
    #[arg(long, value_enum)]
    smoothing: Option<SmoothingArg>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, value_enum, default_value = "tokenization")]
    layout: Layout,
    /// Write the reports here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    text: TextArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long = "eval")]
    eval: Vec<PathBuf>,
    /// Model files (repeatable).
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Row labels, one per model (default: file stem).
    #[arg(long = "label")]
    labels: Vec<String>,
    /// Previously written report JSON files to merge into the table.
    #[arg(long = "report")]
    reports: Vec<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "tokenization")]
    layout: Layout,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Option defaults read from `--config`.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PipelineConfig {
    corpus: Option<PathBuf>,
    train: Option<PathBuf>,
    eval: Option<Vec<PathBuf>>,
    mode: Option<ModeArg>,
    k: Option<usize>,
    target_vocab: Option<usize>,
    alpha: Option<f64>,
    lowercase: Option<bool>,
    rules: Option<PathBuf>,
    diphthongs: Option<bool>,
    threads: Option<usize>,
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<sukukata::Error> for Failure {
    fn from(e: sukukata::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("missing required option --{flag}")))
}

const DEFAULT_ALPHA: f64 = 2.5;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn run(cli: Cli) -> CliResult {
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(n) = cli.threads.or(config.threads) {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match cli.command {
        Command::Syllabify(a) => syllabify(a, &config),
        Command::BuildAlphabet(a) => build_alphabet_cmd(a, &config),
        Command::Train(a) => train(a, &config),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Eval(a) => eval(a, &config),
        Command::Compare(a) => compare(a, &config),
    }
}

fn normalization(text: &TextArgs, config: &PipelineConfig) -> NormalizationConfig {
    NormalizationConfig {
        lowercase: text.lowercase.or(config.lowercase).unwrap_or(true),
        ..NormalizationConfig::default()
    }
}

fn rules(text: &TextArgs, config: &PipelineConfig) -> CliResult<SyllableRuleSet> {
    let rules = match text.rules.as_ref().or(config.rules.as_ref()) {
        Some(path) => {
            let json = fs::read_to_string(path)
                .with_context(|| format!("reading rules {}", path.display()))?;
            SyllableRuleSet::from_json(&json)?
        }
        None => SyllableRuleSet::default(),
    };
    let diphthongs = text.diphthongs || config.diphthongs.unwrap_or(false);
    Ok(if diphthongs { rules.with_diphthongs(true) } else { rules })
}

fn syllabify(args: SyllabifyArgs, config: &PipelineConfig) -> CliResult {
    let norm = normalization(&args.text, config);
    let rules = rules(&args.text, config)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for line in io::stdin().lock().lines() {
        let line = normalize(&line?, &norm);
        let mut units = pre_tokenize(&line);
        for unit in &mut units {
            let segs = rules.segment_unit(unit);
            unit.text = segs.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join("-");
        }
        writeln!(out, "{}", join_units(&units))?;
    }
    out.flush()?;
    Ok(())
}

fn load_corpus(path: &Path) -> CliResult<Corpus> {
    Ok(Corpus::load(path)?)
}

fn build_alphabet_cmd(args: BuildAlphabetArgs, config: &PipelineConfig) -> CliResult {
    let path = required(args.corpus.or(config.corpus.clone()), "corpus")?;
    let k = required(args.k.or(config.k), "k")?;
    let norm = normalization(&args.text, config);
    let rules = rules(&args.text, config)?;
    let corpus = load_corpus(&path)?;
    let words = count_word_units(&corpus.normalized(&norm));
    let table = count_segments_in_words(&words, &rules);
    let alphabet = build_alphabet(&table, k);
    if alphabet.syllable_units().len() < k {
        warn!(
            "k = {k} exceeds the {} distinct multi-character segments; all are kept",
            alphabet.syllable_units().len()
        );
    }
    if let Some(p) = &args.freq_out {
        write_file(p, &table.to_tsv())?;
    }
    let mut json = alphabet.to_json();
    json.push('\n');
    match &args.out {
        Some(p) => write_file(p, &json)?,
        None => io::stdout().write_all(json.as_bytes())?,
    }
    info!(
        "alphabet: k = {k}, {} syllable units, {} character units, |Σ| = {}",
        alphabet.syllable_units().len(),
        alphabet.char_units().len(),
        alphabet.len()
    );
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.with_extension("").into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn train(args: TrainArgs, config: &PipelineConfig) -> CliResult {
    let corpus_path = required(args.corpus.or(config.corpus.clone()), "corpus")?;
    let out = required(args.out.or(config.out.clone()), "out")?;
    let mode = args.mode.or(config.mode).unwrap_or(ModeArg::Syllable);
    let k = match mode {
        ModeArg::Syllable => required(args.k.or(config.k), "k")?,
        ModeArg::Plain => 0,
    };
    let target_vocab = required(args.target_vocab.or(config.target_vocab), "vocab")?;
    let train_config = TrainConfig {
        mode: match mode {
            ModeArg::Syllable => Mode::Syllable,
            ModeArg::Plain => Mode::Plain,
        },
        k,
        target_vocab,
        normalization: normalization(&args.text, config),
        rules: rules(&args.text, config)?,
    };
    let corpus = load_corpus(&corpus_path)?;
    let trained = train_tokenizer(&corpus.documents, &train_config)?;
    let s = &trained.summary;
    if s.k_saturated {
        warn!(
            "k = {} exceeds the number of distinct multi-character segments; the alphabet keeps all {}",
            s.k, s.syllable_units
        );
    }
    trained.model.save(&out)?;
    let freq_out = args.freq_out.unwrap_or_else(|| with_suffix(&out, ".freq.tsv"));
    write_file(&freq_out, &trained.frequencies.to_tsv())?;

    let echo = serde_json::json!({
        "corpus": corpus_path,
        "corpus_id": corpus.id,
        "documents": corpus.documents.len(),
        "train": train_config,
    });
    let log = format!(
        "mode: {:?}\nk: {}\nsyllable units: {}\ncharacter units: {}\nalphabet size: {}\nmerges: {}\n\
         vocab size: {} (target {} + {} special tokens)\nk saturated: {}\nrule set hash: {}\nconfig: {}\n",
        s.mode,
        s.k,
        s.syllable_units,
        s.char_units,
        s.alphabet_size,
        s.merges,
        s.vocab_size,
        s.target_vocab,
        sukukata::tokenizer::SPECIAL_COUNT,
        s.k_saturated,
        s.rule_set_hash,
        serde_json::to_string(&echo).expect("config echo serializes"),
    );
    let log_out = args.log_out.unwrap_or_else(|| with_suffix(&out, ".log"));
    write_file(&log_out, &log)?;
    for line in log.lines() {
        info!("{line}");
    }
    Ok(())
}

fn encode(args: EncodeArgs) -> CliResult {
    let model = TokenizerModel::load(&args.model)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for line in io::stdin().lock().lines() {
        let line = line?;
        if args.pieces {
            writeln!(out, "{}", model.encode_pieces(&line).join(" "))?;
        } else {
            let ids: Vec<String> = model.encode(&line).iter().map(u32::to_string).collect();
            writeln!(out, "{}", ids.join(" "))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn decode(args: DecodeArgs) -> CliResult {
    let model = TokenizerModel::load(&args.model)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (n, line) in io::stdin().lock().lines().enumerate() {
        let line = line?;
        let ids = line
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<Result<Vec<u32>, _>>()
            .map_err(|e| anyhow!("line {}: {e}", n + 1))?;
        let text = model
            .decode(&ids)
            .with_context(|| format!("line {}", n + 1))?;
        writeln!(out, "{text}")?;
    }
    out.flush()?;
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Loads the training corpus and the evaluation corpora, the latter
/// paired with the smoothing their role calls for.
fn corpora(
    train: Option<PathBuf>,
    eval: Vec<PathBuf>,
    config: &PipelineConfig,
) -> CliResult<(Corpus, Vec<(Corpus, Smoothing)>)> {
    let train_path = required(train.or(config.train.clone()).or(config.corpus.clone()), "train")?;
    let eval_paths = if eval.is_empty() {
        config.eval.clone().unwrap_or_else(|| vec![train_path.clone()])
    } else {
        eval
    };
    let train = load_corpus(&train_path)?;
    let mut evals = Vec::new();
    for p in eval_paths {
        let held_out = !same_file(&p, &train_path);
        let corpus = if held_out { load_corpus(&p)? } else { train.clone() };
        evals.push((corpus, Smoothing::for_held_out(held_out)));
    }
    Ok((train, evals))
}

fn alpha(value: Option<f64>, config: &PipelineConfig) -> CliResult<f64> {
    let a = value.or(config.alpha).unwrap_or(DEFAULT_ALPHA);
    if a.is_nan() || a < 0.0 {
        return Err(usage(format!("--alpha must be non-negative, got {a}")));
    }
    Ok(a)
}

fn emit(reports: &[MetricsReport], layout: Layout, out: Option<&Path>) -> CliResult {
    let table = match layout {
        Layout::Tokenization => render_tokenization_table(reports),
        Layout::Segmentation => render_segmentation_table(reports),
    };
    print!("{table}");
    if let Some(p) = out {
        let mut json = serde_json::to_string_pretty(reports).expect("reports serialize");
        json.push('\n');
        write_file(p, &json)?;
    }
    Ok(())
}

fn eval(args: EvalArgs, config: &PipelineConfig) -> CliResult {
    let alpha = alpha(args.alpha, config)?;
    if let Some(stream) = &args.stream {
        let vocab_size = required(args.vocab_size, "vocab-size")?;
        let file = fs::File::open(stream).with_context(|| format!("opening {}", stream.display()))?;
        let stats = read_token_stream(io::BufReader::new(file))?;
        let options = EvalOptions {
            label: args.label.unwrap_or_else(|| file_stem(stream)),
            corpus_id: args.corpus_id.unwrap_or_else(|| file_stem(stream)),
            alpha,
            smoothing: Smoothing::None,
        };
        let report = report_from_stream(&stats, vocab_size, &options)?;
        return emit(&[report], args.layout, args.out.as_deref());
    }

    let norm = normalization(&args.text, config);
    let rules = rules(&args.text, config)?;
    let (train, evals) = corpora(args.train, args.eval, config)?;
    let (segmenter, default_label) = match (&args.model, args.segmentation) {
        (Some(path), _) => {
            let model = TokenizerModel::load(path)?;
            (Segmenter::Model(Box::new(model)), file_stem(path))
        }
        (None, Some(kind)) => {
            let words = count_word_units(&train.normalized(&norm));
            let table = count_segments_in_words(&words, &rules);
            match kind {
                SegmentationArg::Character => (
                    Segmenter::Character {
                        normalization: norm.clone(),
                        alphabet: build_alphabet(&table, 0),
                    },
                    "Character-based".to_string(),
                ),
                SegmentationArg::Syllable => {
                    let k = required(args.k.or(config.k), "k")?;
                    (
                        Segmenter::Syllable {
                            normalization: norm.clone(),
                            rules: rules.clone(),
                            alphabet: build_alphabet(&table, k),
                        },
                        format!("Syllable-based k={k}"),
                    )
                }
                SegmentationArg::Bpe => {
                    let chars = build_alphabet(&table, 0);
                    let target = match args.target_vocab.or(config.target_vocab) {
                        Some(v) => v,
                        None => build_alphabet(&table, required(args.k.or(config.k), "k")?).len(),
                    };
                    let bpe = BpeSegmenter::train(&words, norm.clone(), rules.clone(), chars, target)?;
                    (Segmenter::Bpe(Box::new(bpe)), format!("BPE |V|={target}"))
                }
            }
        }
        (None, None) => return Err(usage("one of --model, --segmentation or --stream is required")),
    };
    let label = args.label.unwrap_or(default_label);
    let smoothing_override = args.smoothing.map(|s| match s {
        SmoothingArg::None => Smoothing::None,
        SmoothingArg::AddOne => Smoothing::AddOne,
    });
    let train_stats = segmenter.unit_stats(&train.documents);
    let mut reports = Vec::new();
    for (corpus, smoothing) in &evals {
        let options = EvalOptions {
            label: label.clone(),
            corpus_id: corpus.id.clone(),
            alpha,
            smoothing: smoothing_override.unwrap_or(*smoothing),
        };
        let eval_stats = if corpus.id == train.id {
            train_stats.clone()
        } else {
            segmenter.unit_stats(&corpus.documents)
        };
        reports.push(sukukata::eval::report_from_stats(
            &train_stats,
            &eval_stats,
            segmenter.vocab_size(),
            segmenter.rule_set_hash(),
            &options,
        )?);
    }
    emit(&reports, args.layout, args.out.as_deref())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn compare(args: CompareArgs, config: &PipelineConfig) -> CliResult {
    if args.models.is_empty() && args.reports.is_empty() {
        return Err(usage("compare needs at least one --model or --report"));
    }
    if !args.labels.is_empty() && args.labels.len() != args.models.len() {
        return Err(usage("give one --label per --model"));
    }
    let alpha = alpha(args.alpha, config)?;
    let mut reports: Vec<MetricsReport> = Vec::new();
    if !args.models.is_empty() {
        let (train, evals) = corpora(args.train, args.eval, config)?;
        for (i, path) in args.models.iter().enumerate() {
            let model = TokenizerModel::load(path)?;
            let label = args.labels.get(i).cloned().unwrap_or_else(|| file_stem(path));
            let seg = Segmenter::Model(Box::new(model));
            for (corpus, smoothing) in &evals {
                let options = EvalOptions {
                    label: label.clone(),
                    corpus_id: corpus.id.clone(),
                    alpha,
                    smoothing: *smoothing,
                };
                reports.push(evaluate(&train.documents, &corpus.documents, &seg, &options)?);
            }
        }
    }
    for path in &args.reports {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut loaded: Vec<MetricsReport> = serde_json::from_str(&text)
            .with_context(|| format!("parsing report {}", path.display()))?;
        reports.append(&mut loaded);
    }
    emit(&reports, args.layout, args.out.as_deref())
}
