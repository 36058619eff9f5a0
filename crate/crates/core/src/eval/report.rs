use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::auc::{auc_single_point, AUC_CONVENTION};
use super::text::harmonic;
use crate::tokens::Extraction;

/// Benchmark scoring scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Oie2016,
    Wire57,
    Carb,
    Carb11,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Carb, Scheme::Carb11, Scheme::Oie2016, Scheme::Wire57];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Oie2016 => "oie2016",
            Scheme::Wire57 => "wire57",
            Scheme::Carb => "carb",
            Scheme::Carb11 => "carb11",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scheme '{s}' (expected oie2016, wire57, carb or carb11)"))
    }
}

/// Gold and predicted extractions of one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub sentence: String,
    pub gold: Vec<Extraction>,
    pub pred: Vec<Extraction>,
}

/// Result of aligning gold and prediction files by sentence string.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// One entry per gold sentence, in gold order.
    pub pairs: Vec<SentencePair>,
    /// Predicted sentences missing from gold, in first-seen order.
    pub unmatched_pred: Vec<String>,
}

/// Pairs every gold sentence with the predictions carrying the exact same
/// sentence string. Gold sentences without predictions get an empty list.
pub fn align_by_sentence(gold: &[(String, Vec<Extraction>)], pred: &[(String, Vec<Extraction>)]) -> Alignment {
    let mut by_sentence: BTreeMap<&str, Vec<Extraction>> = BTreeMap::new();
    for (s, exs) in pred {
        by_sentence.entry(s.as_str()).or_default().extend(exs.iter().cloned());
    }
    let mut pairs: Vec<SentencePair> = Vec::with_capacity(gold.len());
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (s, exs) in gold {
        if let Some(&k) = index.get(s.as_str()) {
            pairs[k].gold.extend(exs.iter().cloned());
            continue;
        }
        index.insert(s.as_str(), pairs.len());
        pairs.push(SentencePair { sentence: s.clone(), gold: exs.clone(), pred: by_sentence.remove(s.as_str()).unwrap_or_default() });
    }
    let mut unmatched_pred = Vec::new();
    for (s, _) in pred {
        if by_sentence.contains_key(s.as_str()) && !unmatched_pred.contains(s) {
            unmatched_pred.push(s.clone());
        }
    }
    Alignment { pairs, unmatched_pred }
}

/// Numerators and denominators of one sentence. Corpus precision is
/// `Σ precision_num / Σ precision_den`, recall likewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub sentence: String,
    pub n_gold: usize,
    pub n_pred: usize,
    pub matched: usize,
    pub precision_num: f64,
    pub precision_den: f64,
    pub recall_num: f64,
    pub recall_den: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub scheme: Scheme,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub auc_convention: String,
    pub n_sentences: usize,
    pub n_gold: usize,
    pub n_pred: usize,
    pub matched: usize,
    pub precision_num: f64,
    pub precision_den: f64,
    pub recall_num: f64,
    pub recall_den: f64,
    /// Predicted sentences excluded because gold lacks them.
    pub excluded_pred_sentences: usize,
    pub notes: Vec<String>,
    pub sentences: Vec<SentenceScore>,
}

impl BenchmarkReport {
    /// Micro-averages per-sentence totals in order. Empty denominators give 0.
    pub fn from_sentences(scheme: Scheme, sentences: Vec<SentenceScore>) -> Self {
        let mut r = BenchmarkReport {
            scheme,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            auc: None,
            auc_convention: AUC_CONVENTION.to_string(),
            n_sentences: sentences.len(),
            n_gold: 0,
            n_pred: 0,
            matched: 0,
            precision_num: 0.0,
            precision_den: 0.0,
            recall_num: 0.0,
            recall_den: 0.0,
            excluded_pred_sentences: 0,
            notes: Vec::new(),
            sentences: Vec::new(),
        };
        for s in &sentences {
            r.n_gold += s.n_gold;
            r.n_pred += s.n_pred;
            r.matched += s.matched;
            r.precision_num += s.precision_num;
            r.precision_den += s.precision_den;
            r.recall_num += s.recall_num;
            r.recall_den += s.recall_den;
        }
        let ratio = |n: f64, d: f64| if d > 0.0 { (n / d).clamp(0.0, 1.0) } else { 0.0 };
        r.precision = ratio(r.precision_num, r.precision_den);
        r.recall = ratio(r.recall_num, r.recall_den);
        r.f1 = harmonic(r.precision, r.recall);
        r.auc = Some(auc_single_point(r.precision, r.recall));
        if r.n_pred == 0 {
            r.notes.push("no predictions: precision is defined as 0".to_string());
        }
        r.sentences = sentences;
        r
    }
}

/// Fixed-width table with one row per report.
pub fn format_table(reports: &[BenchmarkReport]) -> String {
    let mut out = String::from("scheme    |      P |      R |     F1 |    AUC\n");
    out.push_str("----------+--------+--------+--------+-------\n");
    for r in reports {
        let auc = r.auc.map_or_else(|| "     -".to_string(), |a| format!("{:6.1}", 100.0 * a));
        out.push_str(&format!(
            "{:<9} | {:6.1} | {:6.1} | {:6.1} | {}\n",
            r.scheme.name(),
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.f1,
            auc
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ex(s: &str) -> Extraction {
        Extraction::new(s, "r", "o")
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("carb2".parse::<Scheme>().is_err());
    }

    #[test]
    fn alignment_by_sentence_string() {
        let gold = vec![("s1".to_string(), vec![ex("a")]), ("s2".to_string(), vec![ex("b")])];
        let pred = vec![("s2".to_string(), vec![ex("b")]), ("s3".to_string(), vec![ex("c")]), ("s2".to_string(), vec![ex("d")])];
        let al = align_by_sentence(&gold, &pred);
        assert_eq!(al.pairs.len(), 2);
        assert!(al.pairs[0].pred.is_empty());
        assert_eq!(al.pairs[1].pred.len(), 2);
        assert_eq!(al.unmatched_pred, vec!["s3".to_string()]);
    }

    #[test]
    fn totals_are_sums_of_sentences() {
        let s = |pn, pd, rn, rd| SentenceScore {
            sentence: String::new(),
            n_gold: 1,
            n_pred: 1,
            matched: 1,
            precision_num: pn,
            precision_den: pd,
            recall_num: rn,
            recall_den: rd,
        };
        let r = BenchmarkReport::from_sentences(Scheme::Wire57, vec![s(1.0, 2.0, 1.0, 4.0), s(2.0, 2.0, 1.0, 4.0)]);
        assert_eq!(r.precision, 0.75);
        assert_eq!(r.recall, 0.25);
        assert!((r.f1 - 0.375).abs() < 1e-15);
        assert_eq!(r.n_gold, 2);
    }
}
