//! The `slotie` command line: convert, synth, train, extract and score.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure during training.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use slotie_core::data::{
    convert_conll_corpus, lcs_align, synth_generate, ConvertedRecord, GenerativeRecord, Language, LsoieOutcome, SynthError, TemplateKind,
    TripletPool,
};
use slotie_core::eval::{align_by_sentence, format_table, score, Scheme};
use slotie_core::nn::{decode_with, EpochMetrics, NnError, Tagger, TrainError, TrainExample, Trainer, Vocab};
use slotie_core::tokens::tokenize;
use slotie_core::Extraction;

use crate::checkpoint::{Checkpoint, FORMAT_VERSION};
use crate::config::RunConfig;
use crate::io::{
    format_grids_jsonl, meta_path, parse_conll, parse_generative_jsonl, parse_pool_tsv, parse_sentences, read_grids_jsonl,
    read_text, read_tuples_tsv, write_json, write_text, write_tuples_tsv, DataError,
};

#[derive(Debug, Parser)]
#[command(name = "slotie", version, about = "Slot-based triplet extraction: data conversion, training, extraction and scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a tuple corpus into mask-level training grids.
    Convert(ConvertArgs),
    /// Generate template sentences from a triplet pool.
    Synth(SynthArgs),
    /// Train a tagger on grid files.
    Train(TrainArgs),
    /// Extract triplets from one sentence per line.
    Extract(ExtractArgs),
    /// Score predicted tuples against gold tuples.
    Score(ScoreArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// JSON lines of sentences with string tuples.
    Imojie,
    /// CoNLL blocks with predicate and argument tags.
    Lsoie,
}

#[derive(Debug, clap::Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub format: InputFormat,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report of skipped records and tuples.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_language(s: &str) -> Result<Language, String> {
    match s {
        "en" => Ok(Language::En),
        "es" => Ok(Language::Es),
        "pt" => Ok(Language::Pt),
        _ => Err(format!("unknown language '{s}' (expected en, es or pt)")),
    }
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Tab-separated subject, relation, object lines.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tuples TSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write exact mask grids as JSON lines.
    #[arg(long)]
    pub grids: Option<PathBuf>,
    #[arg(long, value_parser = parse_language)]
    pub language: Option<Language>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Grid files; may be repeated.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path; rewritten whenever validation improves.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub slots: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One sentence per line.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop slots lacking a subject, relation or object.
    #[arg(long, action = clap::ArgAction::Set)]
    pub require_all_parts: Option<bool>,
}

#[derive(Debug, clap::Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub scheme: Scheme,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    RunConfig::load(path).map_err(|e| match e {
        crate::config::ConfigError::Read(d) => CliError::Data(d.to_string()),
        other => CliError::Usage(other.to_string()),
    })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

#[derive(Serialize)]
struct Meta<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    details: T,
}

fn write_meta<T: Serialize>(output: &Path, command: &str, config: &RunConfig, details: T) -> Result<(), CliError> {
    write_json(&meta_path(output), &Meta { command, config, details })?;
    Ok(())
}

#[derive(Serialize)]
struct Skipped {
    line: usize,
    tuple: Option<usize>,
    reason: String,
}

pub fn cmd_convert(args: &ConvertArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?.resolve();
    let text = read_text(&args.input)?;
    let at = |e: crate::io::LineError| CliError::Data(e.at(&args.input).to_string());
    let mut converted: Vec<ConvertedRecord> = Vec::new();
    let mut skipped: Vec<Skipped> = Vec::new();
    let records_read;
    match args.format {
        InputFormat::Imojie => {
            let records = parse_generative_jsonl(&text).map_err(at)?;
            records_read = records.len();
            for (line, record) in records {
                match lcs_align(&record) {
                    Ok(out) => {
                        for s in &out.skipped {
                            let reason = format!("tokens not found in sentence: {}", s.unmatched.join(" "));
                            skipped.push(Skipped { line, tuple: Some(s.index), reason });
                        }
                        if out.grid.is_empty() {
                            skipped.push(Skipped { line, tuple: None, reason: "no tuple could be aligned".into() });
                        } else {
                            converted.push(ConvertedRecord { seq: out.seq, grid: out.grid });
                        }
                    }
                    Err(e) => skipped.push(Skipped { line, tuple: None, reason: e.to_string() }),
                }
            }
        }
        InputFormat::Lsoie => {
            let blocks = parse_conll(&text).map_err(at)?;
            records_read = blocks.len();
            let records: Vec<_> = blocks.iter().map(|(_, r)| r.clone()).collect();
            for (idx, outcome) in convert_conll_corpus(&records) {
                let line = blocks[idx].0;
                match outcome {
                    Ok(LsoieOutcome::Converted { record, rejected_layers }) => {
                        for (k, reason) in rejected_layers {
                            skipped.push(Skipped { line, tuple: Some(k), reason: format!("filtered: {reason}") });
                        }
                        converted.push(record);
                    }
                    Ok(LsoieOutcome::Rejected { reasons }) => {
                        for (k, reason) in reasons {
                            skipped.push(Skipped { line, tuple: Some(k), reason: format!("filtered: {reason}") });
                        }
                    }
                    Err(e) => return Err(CliError::Data(format!("{}:{line}: {e}", display(&args.input)))),
                }
            }
        }
    }
    write_text(&args.out, &format_grids_jsonl(&converted))?;
    let triplets: usize = converted.iter().map(|r| r.grid.len()).sum();
    let details = json!({
        "format": args.format,
        "input": display(&args.input),
        "records_read": records_read,
        "records_converted": converted.len(),
        "triplets": triplets,
        "skipped": skipped,
    });
    write_json(&args.report, &Meta { command: "convert", config: &config, details: &details })?;
    write_meta(&args.out, "convert", &config, &details)?;
    eprintln!("converted {} of {} records ({} triplets, {} skipped items)", converted.len(), records_read, triplets, skipped.len());
    Ok(())
}

fn by_template<T: Serialize + Copy>(values: [T; 4]) -> serde_json::Map<String, serde_json::Value> {
    TemplateKind::ALL.iter().map(|k| (k.to_string(), json!(values[k.index()]))).collect()
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(lang) = args.language {
        config.synth.language = lang;
    }
    let config = config.resolve();
    let triples = parse_pool_tsv(&read_text(&args.pool)?).map_err(|e| CliError::Data(e.at(&args.pool).to_string()))?;
    let pool = TripletPool::new(triples).map_err(|e| CliError::Data(e.to_string()))?;
    let out = synth_generate(&pool, args.n, config.seed, &config.synth.to_config()).map_err(|e| match e {
        SynthError::Config(_) => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    let records: Vec<GenerativeRecord> = out
        .sentences
        .iter()
        .map(|s| GenerativeRecord { sentence: s.sentence.clone(), tuples: s.gold.iter().map(|g| g.clone().with_confidence(1.0)).collect() })
        .collect();
    write_tuples_tsv(&args.out, &records)?;
    let details = json!({
        "pool": display(&args.pool),
        "pool_size": pool.len(),
        "sentences": args.n,
        "seed": config.seed,
        "template_counts": by_template(out.template_counts),
        "template_frequencies": by_template(out.template_frequencies()),
    });
    write_meta(&args.out, "synth", &config, &details)?;
    if let Some(grids) = &args.grids {
        let converted: Vec<ConvertedRecord> =
            out.sentences.iter().map(|s| ConvertedRecord { seq: s.seq.clone(), grid: s.grid.clone() }).collect();
        write_text(grids, &format_grids_jsonl(&converted))?;
        write_meta(grids, "synth", &config, &details)?;
    }
    Ok(())
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::NonFinite { .. } | TrainError::Nn(NnError::Numerical { .. }) => CliError::Numeric(e.to_string()),
        TrainError::Config(_) => CliError::Usage(e.to_string()),
        TrainError::Match(ref m) if matches!(m, slotie_core::matching::MatchError::Config(_)) => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(e) = args.epochs {
        config.train.max_epochs = e;
    }
    if let Some(n) = args.slots {
        config.model.slots = n;
    }
    if let Some(lr) = args.learning_rate {
        config.train.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        config.train.batch_size = b;
    }
    let config = config.resolve();
    let mut data: Vec<TrainExample> = Vec::new();
    for path in &args.data {
        data.extend(read_grids_jsonl(path)?.into_iter().map(|r| TrainExample { seq: r.seq, gold: r.grid }));
    }
    let max_len = config.model.encoder.max_len;
    let before = data.len();
    data.retain(|d| d.seq.len() <= max_len);
    if data.len() < before {
        eprintln!("warning: {} examples longer than {max_len} tokens skipped", before - data.len());
    }
    let vocab = Vocab::build(data.iter().map(|d| &d.seq));
    let model = Tagger::new(&config.model, vocab).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut trainer = Trainer::new(model, &data, config.train.clone()).map_err(train_error)?;
    let selection_indices: Vec<usize> = if trainer.validation_indices().is_empty() {
        (0..data.len()).collect()
    } else {
        trainer.validation_indices().to_vec()
    };
    let data_files: Vec<String> = args.data.iter().map(|p| display(p)).collect();
    let metrics_path = {
        let mut name = args.out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".metrics.json");
        args.out.with_file_name(name)
    };
    let start = Instant::now();
    for _ in 0..config.train.max_epochs {
        let m: EpochMetrics = trainer.run_epoch().map_err(train_error)?;
        eprintln!(
            "epoch {:>3}  loss {:.5}  val macro-F1 {:.4}  best {:.4}  ({:.1}s)",
            m.epoch,
            m.train_loss,
            m.val_macro_f1,
            m.best_macro_f1,
            start.elapsed().as_secs_f64()
        );
        if m.improved {
            let ckpt = Checkpoint {
                format_version: FORMAT_VERSION,
                config: config.clone(),
                data_files: data_files.clone(),
                best_epoch: m.epoch,
                best_macro_f1: m.val_macro_f1,
                selection_indices: selection_indices.clone(),
                history: trainer.history().to_vec(),
                model: trainer.model().clone(),
            };
            ckpt.save(&args.out)?;
        }
        write_json(&metrics_path, &json!({ "command": "train", "config": &config, "data_files": &data_files, "history": trainer.history() }))?;
    }
    Ok(())
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(|e| CliError::Data(e.to_string()))?;
    let mut config = ckpt.config.clone();
    if let Some(b) = args.require_all_parts {
        config.decode.require_all_parts = b;
    }
    let sentences = parse_sentences(&read_text(&args.input)?);
    let model = &ckpt.model;
    let max_len = model.encoder().config().max_len;
    let batch = config.extract.batch_size.max(1);
    let mut records = Vec::new();
    let mut skipped: Vec<usize> = Vec::new();
    let mut extractions = 0usize;
    let start = Instant::now();
    for (b, chunk) in sentences.chunks(batch).enumerate() {
        for (k, sentence) in chunk.iter().enumerate() {
            let line = b * batch + k + 1;
            let seq = match tokenize(sentence, true) {
                Ok(seq) if seq.len() <= max_len => seq,
                Ok(seq) => {
                    eprintln!("warning: line {line}: {} tokens exceed the maximum of {max_len}, skipped", seq.len());
                    skipped.push(line);
                    continue;
                }
                Err(e) => {
                    eprintln!("warning: line {line}: {e}, skipped");
                    skipped.push(line);
                    continue;
                }
            };
            let p = model.forward(&seq).map_err(|e| CliError::Data(format!("line {line}: {e}")))?;
            let tuples: Vec<Extraction> = decode_with(&p, &seq, &config.decode);
            extractions += tuples.len();
            if !tuples.is_empty() {
                records.push(GenerativeRecord { sentence: sentence.clone(), tuples });
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    write_tuples_tsv(&args.out, &records)?;
    let details = json!({
        "checkpoint": display(&args.checkpoint),
        "input": display(&args.input),
        "sentences": sentences.len(),
        "skipped_lines": skipped,
        "extractions": extractions,
    });
    write_meta(&args.out, "extract", &config, &details)?;
    let processed = sentences.len() - skipped.len();
    let rate = if elapsed > 0.0 { processed as f64 / elapsed } else { 0.0 };
    eprintln!("{processed} sentences, {extractions} extractions, {rate:.1} sentences/sec (batch {batch})");
    if !skipped.is_empty() {
        eprintln!("{} over-length or empty sentences skipped", skipped.len());
    }
    Ok(())
}

fn sentence_groups(records: Vec<GenerativeRecord>) -> Vec<(String, Vec<Extraction>)> {
    records.into_iter().map(|r| (r.sentence, r.tuples)).collect()
}

pub fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    let gold = sentence_groups(read_tuples_tsv(&args.gold)?);
    let pred = sentence_groups(read_tuples_tsv(&args.pred)?);
    let aligned = align_by_sentence(&gold, &pred);
    for s in &aligned.unmatched_pred {
        eprintln!("warning: predicted sentence not in gold, excluded: {s}");
    }
    let mut report = score(args.scheme, &aligned.pairs);
    report.excluded_pred_sentences = aligned.unmatched_pred.len();
    let config = json!({ "scheme": args.scheme, "gold": display(&args.gold), "pred": display(&args.pred) });
    write_json(&args.out, &json!({ "command": "score", "config": config, "report": &report }))?;
    print!("{}", format_table(std::slice::from_ref(&report)));
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Convert(a) => cmd_convert(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Score(a) => cmd_score(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
