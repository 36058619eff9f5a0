use alloc::string::String;
use alloc::vec::Vec;

use super::report::{BenchmarkReport, Scheme, SentencePair, SentenceScore};
use super::text::{bag_overlap, content_tokens, normalize, Stopwords};
use super::wire57::TokenOverlap;
use super::{greedy_match, ScoredPair};
use crate::matching::{hungarian_max, SimilarityMatrix};
use crate::tokens::Extraction;

fn content_parts(e: &Extraction, sw: &Stopwords) -> [Vec<String>; 3] {
    e.parts().map(|p| content_tokens(p, sw))
}

/// Per-part multiset overlap of stopword-filtered tokens, or `None` when the
/// relations share no word.
pub fn carb_pair(t: &Extraction, g: &Extraction, stopwords: &Stopwords) -> Option<TokenOverlap> {
    if bag_overlap(&normalize(&t.rel), &normalize(&g.rel)) == 0 {
        return None;
    }
    let tp = content_parts(t, stopwords);
    let gp = content_parts(g, stopwords);
    Some(TokenOverlap {
        shared: (0..3).map(|k| bag_overlap(&tp[k], &gp[k])).sum(),
        pred_len: tp.iter().map(Vec::len).sum(),
        gold_len: gp.iter().map(Vec::len).sum(),
    })
}

/// `table[i][j]` scores prediction i against gold j.
fn pair_table(pair: &SentencePair, sw: &Stopwords) -> Vec<Vec<Option<TokenOverlap>>> {
    pair.pred.iter().map(|t| pair.gold.iter().map(|g| carb_pair(t, g, sw)).collect()).collect()
}

pub fn carb_sentence(pair: &SentencePair, stopwords: &Stopwords) -> SentenceScore {
    let table = pair_table(pair, stopwords);
    let recall_num: f64 = (0..pair.gold.len())
        .map(|j| table.iter().filter_map(|row| row[j].map(|o| o.recall())).fold(0.0, f64::max))
        .sum();
    let mut cands = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(o) = cell.filter(|o| o.shared > 0) {
                cands.push(ScoredPair { pred: i, gold: j, precision: o.precision(), recall: o.recall(), f1: o.f1() });
            }
        }
    }
    let matched = greedy_match(cands, |p| (p.precision, p.pred, p.gold));
    SentenceScore {
        sentence: pair.sentence.clone(),
        n_gold: pair.gold.len(),
        n_pred: pair.pred.len(),
        matched: matched.len(),
        precision_num: matched.iter().map(|p| p.precision).sum(),
        precision_den: pair.pred.len() as f64,
        recall_num,
        recall_den: pair.gold.len() as f64,
    }
}

/// Recall averages each gold tuple's best recall over all predictions;
/// precision averages greedy one-to-one precision matches.
pub fn carb_score(corpus: &[SentencePair], stopwords: &Stopwords) -> BenchmarkReport {
    BenchmarkReport::from_sentences(Scheme::Carb, corpus.iter().map(|p| carb_sentence(p, stopwords)).collect())
}

/// Optimal one-to-one matching on pair F1.
pub fn carb11_matching(pair: &SentencePair, stopwords: &Stopwords) -> Vec<ScoredPair> {
    let (np, ng) = (pair.pred.len(), pair.gold.len());
    if np == 0 || ng == 0 {
        return Vec::new();
    }
    let table = pair_table(pair, stopwords);
    let f1 = |i: usize, j: usize| table[i][j].map_or(0.0, |o| o.f1());
    let pairs: Vec<(usize, usize)> = if np >= ng {
        let a = hungarian_max(&SimilarityMatrix::from_fn(np, ng, f1)).expect("rows cover columns");
        a.pairs
    } else {
        let a = hungarian_max(&SimilarityMatrix::from_fn(ng, np, |j, i| f1(i, j))).expect("rows cover columns");
        a.pairs.into_iter().map(|(j, i)| (i, j)).collect()
    };
    let mut out: Vec<ScoredPair> = pairs
        .into_iter()
        .filter_map(|(i, j)| {
            let o = table[i][j].filter(|o| o.shared > 0)?;
            Some(ScoredPair { pred: i, gold: j, precision: o.precision(), recall: o.recall(), f1: o.f1() })
        })
        .collect();
    out.sort_by_key(|p| (p.pred, p.gold));
    out
}

pub fn carb11_sentence(pair: &SentencePair, stopwords: &Stopwords) -> SentenceScore {
    let matched = carb11_matching(pair, stopwords);
    SentenceScore {
        sentence: pair.sentence.clone(),
        n_gold: pair.gold.len(),
        n_pred: pair.pred.len(),
        matched: matched.len(),
        precision_num: matched.iter().map(|p| p.precision).sum(),
        precision_den: pair.pred.len() as f64,
        recall_num: matched.iter().map(|p| p.recall).sum(),
        recall_den: pair.gold.len() as f64,
    }
}

/// CaRB similarities with a single optimal one-to-one matching for both
/// precision and recall.
pub fn carb11_score(corpus: &[SentencePair], stopwords: &Stopwords) -> BenchmarkReport {
    BenchmarkReport::from_sentences(Scheme::Carb11, corpus.iter().map(|p| carb11_sentence(p, stopwords)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn sp(gold: Vec<Extraction>, pred: Vec<Extraction>) -> SentencePair {
        SentencePair { sentence: "s".to_string(), gold, pred }
    }

    #[test]
    fn relation_gate() {
        let sw = Stopwords::english();
        let t = Extraction::new("Einstein", "died in", "Princeton");
        let g = Extraction::new("Einstein", "lived in", "Princeton");
        // "in" is a stopword but still counts for the gate
        assert!(carb_pair(&t, &g, &sw).is_some());
        let t2 = Extraction::new("Einstein", "visited", "Princeton");
        assert!(carb_pair(&t2, &g, &sw).is_none());
        let r = carb_score(&[sp(vec![g], vec![t2])], &sw);
        assert_eq!((r.precision, r.recall), (0.0, 0.0));
    }

    #[test]
    fn hand_table_two_by_two() {
        // content tokens: g0 = [einstein | born | ulm], g1 = [einstein | died | princeton]
        // p0 = [einstein | born | ulm, germany]  p1 = [he | born | ulm]
        let sw = Stopwords::english();
        let gold = vec![Extraction::new("Einstein", "was born in", "Ulm"), Extraction::new("Einstein", "died in", "Princeton")];
        let pred = vec![Extraction::new("Einstein", "born in", "Ulm , Germany"), Extraction::new("He", "born", "Ulm")];
        let c = carb_sentence(&sp(gold.clone(), pred.clone()), &sw);
        // p0-g0: shared 3, |p0| 4, |g0| 3 -> P .75, R 1. p1-g0: shared 2, P 2/3, R 2/3.
        // g1 passes the gate only with p0 ("in"): shared 1, P .25, R 1/3.
        // recall rows: g0 max 1, g1 max 1/3. precision greedy: p0-g0 .75, then p1 with g1 gated -> none.
        assert!((c.recall_num - (1.0 + 1.0 / 3.0)).abs() < 1e-12);
        assert!((c.precision_num - 0.75).abs() < 1e-12);
        assert_eq!(c.matched, 1);
        let r = carb_score(&[sp(gold, pred)], &sw);
        assert!((r.precision - 0.375).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_to_one_with_duplicate_predictions() {
        let sw = Stopwords::english();
        let g = Extraction::new("Einstein", "was born in", "Ulm");
        let r = carb11_score(&[sp(vec![g.clone()], vec![g.clone(), g.clone()])], &sw);
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
        let r = carb11_score(&[sp(vec![g.clone(), g.clone()], vec![g])], &sw);
        assert_eq!((r.precision, r.recall), (1.0, 0.5));
    }
}
