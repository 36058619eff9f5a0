//! Readers and writers for the on-disk formats.
//!
//! * tuples TSV: `sentence<TAB>confidence<TAB>arg1<TAB>rel<TAB>arg2`, one
//!   extraction per line; columns past the fifth are appended to arg2.
//! * generative JSON lines: `{"sentence": .., "tuples": [..]}` where a tuple
//!   is a list of parts, an `{"arg1", "rel", "arg2"}` object or a string
//!   tagged `<arg1> .. </arg1> <rel> .. </rel> <arg2> .. </arg2>`.
//! * CoNLL: token then one tag column per tuple, blank lines between blocks.
//! * triplet pool TSV: `subject<TAB>relation<TAB>object`.
//! * grids JSON lines: `{"tokens": [..], "masks": ["SSRO..", ..]}` with one
//!   class code per token.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use slotie_core::data::{collapse_parts, ConllRecord, ConvertedRecord, GenerativeRecord};
use slotie_core::{Extraction, LabelGrid, TokenClass, TokenSequence, TripletMask};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },
}

/// A parse failure at a 1-based line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct LineError {
    pub line: usize,
    pub msg: String,
}

impl LineError {
    fn new(line: usize, msg: impl Into<String>) -> Self {
        LineError { line, msg: msg.into() }
    }

    pub fn at(self, path: &Path) -> DataError {
        DataError::Format { path: path.to_path_buf(), line: self.line, msg: self.msg }
    }
}

pub fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

fn push_grouped(records: &mut Vec<GenerativeRecord>, sentence: &str, ex: Extraction) {
    match records.iter_mut().find(|r| r.sentence == sentence) {
        Some(r) => r.tuples.push(ex),
        None => records.push(GenerativeRecord { sentence: sentence.to_string(), tuples: vec![ex] }),
    }
}

/// Parses tuples TSV, grouping lines by sentence in first-seen order.
pub fn parse_tuples_tsv(text: &str) -> Result<Vec<GenerativeRecord>, LineError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            return Err(LineError::new(line_no, format!("expected 5 tab-separated columns, found {}", cols.len())));
        }
        let conf: f64 = cols[1]
            .trim()
            .parse()
            .map_err(|_| LineError::new(line_no, format!("confidence '{}' is not a number", cols[1])))?;
        let ex = collapse_parts(&cols[2..]).with_confidence(conf);
        push_grouped(&mut records, cols[0], ex);
    }
    Ok(records)
}

/// Inverse of [`parse_tuples_tsv`]. A missing confidence is written as 1.0.
pub fn format_tuples_tsv(records: &[GenerativeRecord]) -> Result<String, String> {
    let mut out = String::new();
    for r in records {
        for ex in &r.tuples {
            for field in [&r.sentence, &ex.arg1, &ex.rel, &ex.arg2] {
                if field.contains(['\t', '\n', '\r']) {
                    return Err(format!("field {field:?} contains a tab or newline"));
                }
            }
            let conf = ex.confidence.unwrap_or(1.0);
            out.push_str(&format!("{}\t{:?}\t{}\t{}\t{}\n", r.sentence, conf, ex.arg1, ex.rel, ex.arg2));
        }
    }
    Ok(out)
}

pub fn read_tuples_tsv(path: &Path) -> Result<Vec<GenerativeRecord>, DataError> {
    parse_tuples_tsv(&read_text(path)?).map_err(|e| e.at(path))
}

pub fn write_tuples_tsv(path: &Path, records: &[GenerativeRecord]) -> Result<(), DataError> {
    let text = format_tuples_tsv(records).map_err(|msg| DataError::Format { path: path.to_path_buf(), line: 0, msg })?;
    write_text(path, &text)
}

fn tagged_part<'a>(s: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = s.find(&open)? + open.len();
    let end = s[start..].find(&close)? + start;
    Some(s[start..end].trim())
}

fn parse_tuple(v: &Value) -> Result<Extraction, String> {
    match v {
        Value::Array(parts) => {
            let parts: Vec<&str> = parts.iter().map(|p| p.as_str().ok_or("tuple parts must be strings")).collect::<Result<_, _>>()?;
            if parts.len() < 2 {
                return Err("a tuple needs at least two parts".into());
            }
            Ok(collapse_parts(&parts))
        }
        Value::Object(map) => {
            let get = |k: &str| map.get(k).and_then(Value::as_str).unwrap_or("").to_string();
            Ok(Extraction::new(get("arg1"), get("rel"), get("arg2")))
        }
        Value::String(s) => {
            let arg1 = tagged_part(s, "arg1").ok_or("missing <arg1> tag")?;
            let rel = tagged_part(s, "rel").ok_or("missing <rel> tag")?;
            let arg2 = tagged_part(s, "arg2").unwrap_or("");
            Ok(Extraction::new(arg1, rel, arg2))
        }
        _ => Err("unsupported tuple form".into()),
    }
}

#[derive(Deserialize)]
struct GenerativeLine {
    sentence: String,
    #[serde(default, alias = "extractions")]
    tuples: Vec<Value>,
}

/// Parses generative JSON lines; blank lines are skipped.
pub fn parse_generative_jsonl(text: &str) -> Result<Vec<(usize, GenerativeRecord)>, LineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: GenerativeLine = serde_json::from_str(line).map_err(|e| LineError::new(i + 1, e.to_string()))?;
        let tuples = parsed.tuples.iter().map(parse_tuple).collect::<Result<Vec<_>, _>>().map_err(|e| LineError::new(i + 1, e))?;
        out.push((i + 1, GenerativeRecord { sentence: parsed.sentence, tuples }));
    }
    Ok(out)
}

/// Parses CoNLL blocks, returning each with the line it starts on.
pub fn parse_conll(text: &str) -> Result<Vec<(usize, ConllRecord)>, LineError> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut tokens: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<String>> = Vec::new();
    let mut flush = |start: usize, tokens: &mut Vec<String>, columns: &mut Vec<Vec<String>>| {
        if !tokens.is_empty() {
            out.push((start, ConllRecord { tokens: std::mem::take(tokens), layers: std::mem::take(columns) }));
        }
    };
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            flush(start, &mut tokens, &mut columns);
            continue;
        }
        if tokens.is_empty() {
            start = i + 1;
            columns = vec![Vec::new(); cols.len() - 1];
        } else if cols.len() - 1 != columns.len() {
            return Err(LineError::new(i + 1, format!("expected {} tag columns, found {}", columns.len(), cols.len() - 1)));
        }
        tokens.push(cols[0].to_string());
        for (layer, tag) in columns.iter_mut().zip(&cols[1..]) {
            layer.push(tag.to_string());
        }
    }
    flush(start, &mut tokens, &mut columns);
    Ok(out)
}

/// Parses a triplet pool; blank lines are skipped.
pub fn parse_pool_tsv(text: &str) -> Result<Vec<Extraction>, LineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 || cols.iter().any(|c| c.trim().is_empty()) {
            return Err(LineError::new(i + 1, "expected subject, relation and object separated by tabs"));
        }
        out.push(Extraction::new(cols[0].trim(), cols[1].trim(), cols[2].trim()));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct GridLine {
    tokens: Vec<String>,
    masks: Vec<String>,
}

pub fn format_grids_jsonl(records: &[ConvertedRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let line = GridLine {
            tokens: r.seq.tokens().to_vec(),
            masks: r.grid.masks().iter().map(|m| m.labels().iter().map(|c| c.code()).collect()).collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("grid lines serialize"));
        out.push('\n');
    }
    out
}

/// Parses grids JSON lines. Token offsets are not stored, so sequences come
/// back without source spans.
pub fn parse_grids_jsonl(text: &str) -> Result<Vec<ConvertedRecord>, LineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| LineError::new(i + 1, msg);
        let g: GridLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if g.tokens.is_empty() {
            return Err(err("empty token list".into()));
        }
        let seq = TokenSequence::from_tokens(g.tokens);
        let mut masks = Vec::with_capacity(g.masks.len());
        for m in &g.masks {
            let labels: Vec<TokenClass> = m
                .chars()
                .map(|c| TokenClass::from_code(c).ok_or_else(|| err(format!("unknown class code '{c}'"))))
                .collect::<Result<_, _>>()?;
            masks.push(TripletMask::new(labels));
        }
        let grid = LabelGrid::new(seq.len(), masks).map_err(|e| err(e.to_string()))?;
        out.push(ConvertedRecord { seq, grid });
    }
    Ok(out)
}

pub fn read_grids_jsonl(path: &Path) -> Result<Vec<ConvertedRecord>, DataError> {
    parse_grids_jsonl(&read_text(path)?).map_err(|e| e.at(path))
}

/// Non-blank lines, trimmed.
pub fn parse_sentences(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

/// Path of the metadata file written next to `path`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    write_text(path, &text)
}
