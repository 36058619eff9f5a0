use alloc::string::String;
use alloc::vec::Vec;

use super::report::{BenchmarkReport, Scheme, SentencePair, SentenceScore};
use super::text::{normalize, Stopwords};
use crate::tokens::Extraction;

/// Picks the head word of one tuple element.
pub trait HeadExtractor {
    fn head(&self, element: &str) -> Option<String>;
}

/// Parser-free heuristic: the last non-stopword token, or the last token if
/// all are stopwords. Not the dependency head of the original benchmark.
#[derive(Debug, Clone)]
pub struct LastContentWord {
    stopwords: Stopwords,
}

impl LastContentWord {
    pub fn new(stopwords: Stopwords) -> Self {
        LastContentWord { stopwords }
    }
}

impl Default for LastContentWord {
    fn default() -> Self {
        Self::new(Stopwords::english())
    }
}

impl HeadExtractor for LastContentWord {
    fn head(&self, element: &str) -> Option<String> {
        let toks = normalize(element);
        let last = toks.iter().rev().find(|w| !self.stopwords.contains(w)).or(toks.last());
        last.cloned()
    }
}

pub fn heads_agree(t: &Extraction, g: &Extraction, heads: &dyn HeadExtractor) -> bool {
    t.parts().iter().zip(g.parts()).all(|(a, b)| heads.head(a) == heads.head(b))
}

/// Greedy one-to-one matching in prediction order: each prediction takes
/// the first unused gold tuple whose heads agree. Returns (pred, gold) pairs.
pub fn oie2016_matching(gold: &[Extraction], pred: &[Extraction], heads: &dyn HeadExtractor) -> Vec<(usize, usize)> {
    let mut used = alloc::vec![false; gold.len()];
    let mut out = Vec::new();
    for (i, t) in pred.iter().enumerate() {
        if let Some(j) = (0..gold.len()).find(|&j| !used[j] && heads_agree(t, &gold[j], heads)) {
            used[j] = true;
            out.push((i, j));
        }
    }
    out
}

pub fn oie2016_sentence(pair: &SentencePair, heads: &dyn HeadExtractor) -> SentenceScore {
    let matched = oie2016_matching(&pair.gold, &pair.pred, heads).len();
    SentenceScore {
        sentence: pair.sentence.clone(),
        n_gold: pair.gold.len(),
        n_pred: pair.pred.len(),
        matched,
        precision_num: matched as f64,
        precision_den: pair.pred.len() as f64,
        recall_num: matched as f64,
        recall_den: pair.gold.len() as f64,
    }
}

/// Precision and recall over head-matched tuple counts.
pub fn oie2016_score(corpus: &[SentencePair], heads: &dyn HeadExtractor) -> BenchmarkReport {
    let mut r = BenchmarkReport::from_sentences(Scheme::Oie2016, corpus.iter().map(|p| oie2016_sentence(p, heads)).collect());
    r.notes.push(String::from("heads from a last-content-word heuristic unless a custom extractor is supplied"));
    r
}
