use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::report::{BenchmarkReport, Scheme, SentencePair, SentenceScore};
use super::text::{bag_overlap, harmonic, normalize};
use super::{greedy_match, ScoredPair};
use crate::tokens::Extraction;

/// Token counts behind a WiRe57 pair score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOverlap {
    /// Multiset overlap summed over the three parts.
    pub shared: usize,
    pub pred_len: usize,
    pub gold_len: usize,
}

impl TokenOverlap {
    pub fn precision(&self) -> f64 {
        if self.pred_len == 0 { 0.0 } else { self.shared as f64 / self.pred_len as f64 }
    }

    pub fn recall(&self) -> f64 {
        if self.gold_len == 0 { 0.0 } else { self.shared as f64 / self.gold_len as f64 }
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

fn part_tokens(e: &Extraction) -> [Vec<alloc::string::String>; 3] {
    e.parts().map(normalize)
}

/// Number of normalised tokens over all parts.
pub fn extraction_len(e: &Extraction) -> usize {
    part_tokens(e).iter().map(Vec::len).sum()
}

/// Overlap of a predicted and a gold tuple, or `None` unless every part
/// shares at least one token.
pub fn wire57_pair(t: &Extraction, g: &Extraction) -> Option<TokenOverlap> {
    let tp = part_tokens(t);
    let gp = part_tokens(g);
    let mut shared = 0;
    for k in 0..3 {
        let o = bag_overlap(&tp[k], &gp[k]);
        if o == 0 {
            return None;
        }
        shared += o;
    }
    Some(TokenOverlap {
        shared,
        pred_len: tp.iter().map(Vec::len).sum(),
        gold_len: gp.iter().map(Vec::len).sum(),
    })
}

/// Greedy best-F1 matching of one sentence, with its overlaps.
pub fn wire57_matching(gold: &[Extraction], pred: &[Extraction]) -> Vec<(ScoredPair, TokenOverlap)> {
    let mut cands = Vec::new();
    for (i, t) in pred.iter().enumerate() {
        for (j, g) in gold.iter().enumerate() {
            if let Some(o) = wire57_pair(t, g) {
                let pair = ScoredPair { pred: i, gold: j, precision: o.precision(), recall: o.recall(), f1: o.f1() };
                cands.push((pair, o));
            }
        }
    }
    greedy_match(cands, |(p, _)| (p.f1, p.pred, p.gold))
}

pub fn wire57_sentence(pair: &SentencePair) -> SentenceScore {
    let matched = wire57_matching(&pair.gold, &pair.pred);
    let shared: usize = matched.iter().map(|(_, o)| o.shared).sum();
    SentenceScore {
        sentence: pair.sentence.clone(),
        n_gold: pair.gold.len(),
        n_pred: pair.pred.len(),
        matched: matched.len(),
        precision_num: shared as f64,
        precision_den: pair.pred.iter().map(extraction_len).sum::<usize>() as f64,
        recall_num: shared as f64,
        recall_den: pair.gold.iter().map(extraction_len).sum::<usize>() as f64,
    }
}

/// Micro-averaged token precision and recall over greedy matches.
pub fn wire57_score(corpus: &[SentencePair]) -> BenchmarkReport {
    BenchmarkReport::from_sentences(Scheme::Wire57, corpus.iter().map(wire57_sentence).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn identical_tuple() {
        let t = Extraction::new("Albert Einstein", "is", "a physicist");
        let o = wire57_pair(&t, &t).unwrap();
        assert_eq!((o.shared, o.pred_len, o.gold_len), (5, 5, 5));
        assert_eq!((o.precision(), o.recall(), o.f1()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn longer_gold_lowers_recall() {
        let t = Extraction::new("A spectrum", "has", "a ratio");
        let g = Extraction::new("A spectrum from FID", "has", "a low ratio");
        let o = wire57_pair(&t, &g).unwrap();
        assert_eq!((o.shared, o.pred_len, o.gold_len), (5, 5, 8));
        assert_eq!(o.precision(), 1.0);
        assert_eq!(o.recall(), 0.625);
        assert!((o.f1() - 2.0 * 0.625 / 1.625).abs() < 1e-15);
    }

    #[test]
    fn disjoint_relation_is_not_matching() {
        let t = Extraction::new("Einstein", "was born in", "Ulm");
        let g = Extraction::new("Einstein", "died", "Ulm");
        assert!(wire57_pair(&t, &g).is_none());
    }

    #[test]
    fn empty_predictions_score_zero() {
        let pair = SentencePair { sentence: "s".to_string(), gold: vec![Extraction::new("a", "b", "c")], pred: vec![] };
        let r = wire57_score(&[pair]);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }
}
