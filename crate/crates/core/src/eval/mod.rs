//! Scoring: token macro-F1 for checkpoint selection and the four
//! extraction-level benchmark schemes.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub mod auc;
pub mod carb;
pub mod oie2016;
pub mod report;
pub mod text;
pub mod token_f1;
pub mod wire57;

pub use auc::{auc_single_point, AUC_CONVENTION};
pub use carb::{carb11_score, carb_pair, carb_score};
pub use oie2016::{oie2016_score, HeadExtractor, LastContentWord};
pub use report::{align_by_sentence, format_table, Alignment, BenchmarkReport, Scheme, SentencePair, SentenceScore};
pub use text::Stopwords;
pub use token_f1::{token_confusion, token_macro_f1, TokenConfusion};
pub use wire57::{wire57_pair, wire57_score, TokenOverlap};

/// A scored (prediction, gold) pair within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub pred: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Repeatedly takes the candidate with the highest score, dropping every
/// other candidate sharing its prediction or gold index. `key` returns
/// (score, pred, gold); ties go to the lower prediction, then the lower gold.
pub fn greedy_match<T>(mut candidates: Vec<T>, key: impl Fn(&T) -> (f64, usize, usize)) -> Vec<T> {
    candidates.sort_by(|a, b| {
        let (sa, pa, ga) = key(a);
        let (sb, pb, gb) = key(b);
        sb.total_cmp(&sa).then(pa.cmp(&pb)).then(ga.cmp(&gb))
    });
    let mut used_pred = Vec::new();
    let mut used_gold = Vec::new();
    let mut out = Vec::new();
    for c in candidates {
        let (_, p, g) = key(&c);
        if used_pred.contains(&p) || used_gold.contains(&g) {
            continue;
        }
        used_pred.push(p);
        used_gold.push(g);
        out.push(c);
    }
    out
}

/// Scores a corpus with one scheme, using the shipped stopwords and the
/// default head heuristic.
pub fn score(scheme: Scheme, corpus: &[SentencePair]) -> BenchmarkReport {
    let sw = Stopwords::english();
    match scheme {
        Scheme::Wire57 => wire57_score(corpus),
        Scheme::Carb => carb_score(corpus, &sw),
        Scheme::Carb11 => carb11_score(corpus, &sw),
        Scheme::Oie2016 => oie2016_score(corpus, &LastContentWord::new(sw)),
    }
}
