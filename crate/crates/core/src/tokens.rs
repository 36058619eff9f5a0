//! Token-level domain types: the four label classes, tokenized sentences with
//! byte-offset bookkeeping, per-triplet masks and their conversion to string
//! extractions.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Surface forms of the tokens appended after every model input.
pub const PLACEHOLDERS: [&str; 3] = ["[is]", "[from]", "[to]"];

/// Number of label classes.
pub const NUM_CLASSES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("empty input sentence")]
    EmptyInput,
    #[error("mask contains no triplet tokens")]
    NoTriplet,
    #[error("mask length {mask} does not match sequence length {seq}")]
    LengthMismatch { mask: usize, seq: usize },
    #[error("bad annotation: {0}")]
    BadAnnotation(String),
}

/// Label of one token inside one mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum TokenClass {
    #[default]
    Background = 0,
    Subject = 1,
    Relation = 2,
    Object = 3,
}

impl TokenClass {
    pub const ALL: [TokenClass; NUM_CLASSES] = [
        TokenClass::Background,
        TokenClass::Subject,
        TokenClass::Relation,
        TokenClass::Object,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    /// Single-letter code used by the mask-level file format.
    pub fn code(self) -> char {
        match self {
            TokenClass::Background => 'B',
            TokenClass::Subject => 'S',
            TokenClass::Relation => 'R',
            TokenClass::Object => 'O',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'B' => Some(TokenClass::Background),
            'S' => Some(TokenClass::Subject),
            'R' => Some(TokenClass::Relation),
            'O' => Some(TokenClass::Object),
            _ => None,
        }
    }

    pub fn is_background(self) -> bool {
        self == TokenClass::Background
    }
}

impl fmt::Display for TokenClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Byte range of a token inside the original sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

/// A tokenized sentence. Appended placeholder tokens carry no span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
    spans: Vec<Option<CharSpan>>,
    placeholders: bool,
}

pub(crate) fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '“' | '”' | '‘' | '’' | '«' | '»' | '—' | '–' | '…' | '¿' | '¡' | '„'
        )
}

/// Splits on whitespace, then peels leading and trailing punctuation off each
/// chunk as single-character tokens. Inner punctuation ("28,750",
/// "signal-to-noise") stays attached. Placeholder forms such as "[is]" are
/// kept whole.
pub fn tokenize(sentence: &str, append_placeholders: bool) -> Result<TokenSequence, TokenError> {
    if sentence.trim().is_empty() {
        return Err(TokenError::EmptyInput);
    }
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut push = |start: usize, end: usize| {
        tokens.push(sentence[start..end].to_string());
        spans.push(Some(CharSpan { start, end }));
    };

    let mut chunk_start = None;
    let bytes_end = sentence.len();
    let mut chunks = Vec::new();
    for (i, c) in sentence.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                chunks.push((s, i));
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    if let Some(s) = chunk_start {
        chunks.push((s, bytes_end));
    }

    for (start, end) in chunks {
        let chunk = &sentence[start..end];
        if PLACEHOLDERS.contains(&chunk) {
            push(start, end);
            continue;
        }
        let chars: Vec<(usize, char)> = chunk.char_indices().collect();
        let mut lo = 0;
        while lo < chars.len() && is_punct(chars[lo].1) {
            lo += 1;
        }
        if lo == chars.len() {
            // punctuation-only chunk: every character is its own token
            for &(off, c) in &chars {
                push(start + off, start + off + c.len_utf8());
            }
            continue;
        }
        let mut hi = chars.len();
        while hi > lo && is_punct(chars[hi - 1].1) {
            hi -= 1;
        }
        for &(off, c) in &chars[..lo] {
            push(start + off, start + off + c.len_utf8());
        }
        let word_start = start + chars[lo].0;
        let word_end = if hi == chars.len() { end } else { start + chars[hi].0 };
        push(word_start, word_end);
        for &(off, c) in &chars[hi..] {
            push(start + off, start + off + c.len_utf8());
        }
    }

    let mut seq = TokenSequence { tokens, spans, placeholders: false };
    if append_placeholders {
        seq.append_placeholders();
    }
    Ok(seq)
}

impl TokenSequence {
    /// Builds a sequence from pre-split tokens (no source offsets). If the
    /// last three tokens are the placeholders they are recognised as such.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let n = tokens.len();
        let placeholders = n >= 3
            && tokens[n - 3..]
                .iter()
                .zip(PLACEHOLDERS.iter())
                .all(|(a, b)| a == b);
        let spans = alloc::vec![None; n];
        TokenSequence { tokens, spans, placeholders }
    }

    /// Appends "[is]", "[from]", "[to]" unless already present.
    pub fn append_placeholders(&mut self) {
        if self.placeholders {
            return;
        }
        for p in PLACEHOLDERS {
            self.tokens.push(p.to_string());
            self.spans.push(None);
        }
        self.placeholders = true;
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    /// Source span of token `i`; `None` for appended placeholders and
    /// sequences built from bare tokens.
    pub fn span(&self, i: usize) -> Option<CharSpan> {
        self.spans[i]
    }

    pub fn has_placeholders(&self) -> bool {
        self.placeholders
    }

    pub fn is_placeholder(&self, i: usize) -> bool {
        self.placeholders && i + 3 >= self.tokens.len()
    }

    /// Number of tokens before the placeholders.
    pub fn body_len(&self) -> usize {
        if self.placeholders {
            self.tokens.len() - 3
        } else {
            self.tokens.len()
        }
    }
}

/// Labels of one triplet over every token of a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripletMask {
    labels: Vec<TokenClass>,
}

impl TripletMask {
    pub fn new(labels: Vec<TokenClass>) -> Self {
        TripletMask { labels }
    }

    pub fn background(len: usize) -> Self {
        TripletMask { labels: alloc::vec![TokenClass::Background; len] }
    }

    pub fn labels(&self) -> &[TokenClass] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [TokenClass] {
        &mut self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_background(&self) -> bool {
        self.labels.iter().all(|c| c.is_background())
    }

    pub fn contains(&self, class: TokenClass) -> bool {
        self.labels.contains(&class)
    }

    /// True when subject, relation and object are all present.
    pub fn is_complete(&self) -> bool {
        self.contains(TokenClass::Subject)
            && self.contains(TokenClass::Relation)
            && self.contains(TokenClass::Object)
    }

    /// Token indices of each part, in sequence order.
    pub fn spans(&self) -> TripletSpans {
        let mut spans = TripletSpans::default();
        for (i, c) in self.labels.iter().enumerate() {
            match c {
                TokenClass::Subject => spans.subject.push(i),
                TokenClass::Relation => spans.relation.push(i),
                TokenClass::Object => spans.object.push(i),
                TokenClass::Background => {}
            }
        }
        spans
    }
}

/// Token indices of one triplet, per part.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletSpans {
    pub subject: Vec<usize>,
    pub relation: Vec<usize>,
    pub object: Vec<usize>,
}

impl TripletSpans {
    pub fn new(subject: Vec<usize>, relation: Vec<usize>, object: Vec<usize>) -> Self {
        TripletSpans { subject, relation, object }
    }

    fn parts(&self) -> [(TokenClass, &[usize]); 3] {
        [
            (TokenClass::Subject, &self.subject),
            (TokenClass::Relation, &self.relation),
            (TokenClass::Object, &self.object),
        ]
    }
}

/// The masks of one sentence: gold triplets, or the N decoded slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelGrid {
    seq_len: usize,
    masks: Vec<TripletMask>,
}

impl LabelGrid {
    pub fn new(seq_len: usize, masks: Vec<TripletMask>) -> Result<Self, TokenError> {
        if let Some(m) = masks.iter().find(|m| m.len() != seq_len) {
            return Err(TokenError::LengthMismatch { mask: m.len(), seq: seq_len });
        }
        Ok(LabelGrid { seq_len, masks })
    }

    pub fn empty(seq_len: usize) -> Self {
        LabelGrid { seq_len, masks: Vec::new() }
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn masks(&self) -> &[TripletMask] {
        &self.masks
    }

    /// Number of masks (M for gold grids, N for decoded grids).
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Appends a mask unless an identical one is already present.
    pub fn push_unique(&mut self, mask: TripletMask) -> Result<bool, TokenError> {
        if mask.len() != self.seq_len {
            return Err(TokenError::LengthMismatch { mask: mask.len(), seq: self.seq_len });
        }
        if self.masks.contains(&mask) {
            return Ok(false);
        }
        self.masks.push(mask);
        Ok(true)
    }

    /// Same grid with masks reordered; `order[k]` is the source index of mask k.
    pub fn permuted(&self, order: &[usize]) -> Self {
        LabelGrid {
            seq_len: self.seq_len,
            masks: order.iter().map(|&i| self.masks[i].clone()).collect(),
        }
    }
}

/// One (arg1, rel, arg2) string triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub arg1: String,
    pub rel: String,
    pub arg2: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Extraction {
    pub fn new(arg1: impl Into<String>, rel: impl Into<String>, arg2: impl Into<String>) -> Self {
        Extraction { arg1: arg1.into(), rel: rel.into(), arg2: arg2.into(), confidence: None }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn parts(&self) -> [&str; 3] {
        [&self.arg1, &self.rel, &self.arg2]
    }

    /// Equality of the three strings, ignoring confidence.
    pub fn same_triple(&self, other: &Extraction) -> bool {
        self.parts() == other.parts()
    }
}

/// Joins the tokens of each part with single spaces, in sequence order.
pub fn mask_to_extraction(seq: &TokenSequence, mask: &TripletMask) -> Result<Extraction, TokenError> {
    if mask.len() != seq.len() {
        return Err(TokenError::LengthMismatch { mask: mask.len(), seq: seq.len() });
    }
    if mask.is_background() {
        return Err(TokenError::NoTriplet);
    }
    let mut parts: [Vec<&str>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (tok, class) in seq.tokens().iter().zip(mask.labels()) {
        if !class.is_background() {
            parts[class.index() - 1].push(tok.as_str());
        }
    }
    let [a, r, b] = parts.map(|p| p.join(" "));
    Ok(Extraction::new(a, r, b))
}

/// One mask per gold triplet, in the given order.
pub fn grid_from_tuples(seq: &TokenSequence, gold: &[TripletSpans]) -> Result<LabelGrid, TokenError> {
    let len = seq.len();
    let mut masks: Vec<TripletMask> = Vec::with_capacity(gold.len());
    for (k, triplet) in gold.iter().enumerate() {
        let mut mask = TripletMask::background(len);
        for (class, idxs) in triplet.parts() {
            for &i in idxs {
                if i >= len {
                    return Err(TokenError::BadAnnotation(alloc::format!(
                        "triplet {k}: token index {i} out of range for length {len}"
                    )));
                }
                if !mask.labels[i].is_background() {
                    return Err(TokenError::BadAnnotation(alloc::format!(
                        "triplet {k}: token {i} labelled twice"
                    )));
                }
                mask.labels[i] = class;
            }
        }
        if masks.contains(&mask) {
            return Err(TokenError::BadAnnotation(alloc::format!("triplet {k} duplicates an earlier one")));
        }
        masks.push(mask);
    }
    Ok(LabelGrid { seq_len: len, masks })
}
