//! Token normalisation and bag-of-words overlap shared by the scorers.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::tokens::is_punct;

/// Shipped English stopword list, one word per line; `#` starts a comment.
pub const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

/// FNV-1a 64 of [`STOPWORDS_EN`]. Changing the list changes CaRB scores.
pub const STOPWORDS_EN_FNV1A: u64 = 0x9491_7b39_1acd_76fe;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A sorted set of lowercased words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: Vec<String>,
}

impl Stopwords {
    pub fn parse(text: &str) -> Self {
        let mut words: Vec<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.to_lowercase())
            .collect();
        words.sort();
        words.dedup();
        Stopwords { words }
    }

    pub fn english() -> Self {
        Self::parse(STOPWORDS_EN)
    }

    pub fn empty() -> Self {
        Stopwords { words: Vec::new() }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.binary_search_by(|w| w.as_str().cmp(word)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Lowercased whitespace tokens with surrounding punctuation trimmed;
/// punctuation-only tokens are dropped. Placeholders such as "[is]" become
/// plain words.
pub fn normalize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(is_punct))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// [`normalize`] minus stopwords, falling back to the unfiltered tokens when
/// every token is a stopword.
pub fn content_tokens(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let all = normalize(text);
    let kept: Vec<String> = all.iter().filter(|w| !stopwords.contains(w)).cloned().collect();
    if kept.is_empty() {
        all
    } else {
        kept
    }
}

/// Size of the multiset intersection.
pub fn bag_overlap(a: &[String], b: &[String]) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in a {
        *counts.entry(w.as_str()).or_default() += 1;
    }
    let mut shared = 0;
    for w in b {
        if let Some(c) = counts.get_mut(w.as_str()) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    shared
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn stopword_list_checksum_is_pinned() {
        assert_eq!(fnv1a64(STOPWORDS_EN.as_bytes()), STOPWORDS_EN_FNV1A);
        let sw = Stopwords::english();
        assert_eq!(sw.len(), 127);
        assert!(sw.contains("the") && sw.contains("is") && !sw.contains("physicist"));
    }

    #[test]
    fn normalisation() {
        assert_eq!(normalize("The \"Spectrum\" , [is] ok."), vec!["the", "spectrum", "is", "ok"]);
        assert!(normalize(" ,, . ").is_empty());
    }

    #[test]
    fn content_tokens_fall_back_when_all_are_stopwords() {
        let sw = Stopwords::english();
        assert_eq!(content_tokens("is in the", &sw), vec!["is", "in", "the"]);
        assert_eq!(content_tokens("born in the city", &sw), vec!["born", "city"]);
    }

    #[test]
    fn multiset_overlap() {
        let a = normalize("a a b c");
        let b = normalize("a b b d");
        assert_eq!(bag_overlap(&a, &b), 2);
        assert_eq!(bag_overlap(&b, &a), 2);
    }
}
