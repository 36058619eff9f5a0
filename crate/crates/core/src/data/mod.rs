//! Dataset conversion and generation: tuple-to-mask alignment for
//! generative corpora, CoNLL role-label conversion and the template-based
//! synthetic generator.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tokens::{Extraction, LabelGrid, TokenSequence};

pub mod lcs;
pub mod lsoie;
pub mod synth;

pub use lcs::{lcs_align, AlignOutput, SkippedTuple};
pub use lsoie::{convert_conll_corpus, lsoie_convert, ConllRecord, LsoieOutcome};
pub use synth::{synth_generate, Language, SynthConfig, SynthError, SynthOutput, SynthSentence, TemplateKind, TemplateSpec, TripletPool};

/// A sentence with its string tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeRecord {
    pub sentence: String,
    pub tuples: Vec<Extraction>,
}

/// Folds a tuple of any arity into (arg1, rel, arg2): parts beyond the third
/// are appended to arg2, separated by single spaces. Missing parts are empty.
pub fn collapse_parts<S: AsRef<str>>(parts: &[S]) -> Extraction {
    let get = |i: usize| parts.get(i).map_or("", |s| s.as_ref().trim());
    let mut arg2 = String::from(get(2));
    for extra in parts.iter().skip(3) {
        let extra = extra.as_ref().trim();
        if extra.is_empty() {
            continue;
        }
        if !arg2.is_empty() {
            arg2.push(' ');
        }
        arg2.push_str(extra);
    }
    Extraction::new(get(0), get(1), arg2)
}

/// A token sequence with its gold masks, ready for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertedRecord {
    pub seq: TokenSequence,
    pub grid: LabelGrid,
}
