use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::GenerativeRecord;
use crate::tokens::{tokenize, LabelGrid, TokenClass, TokenError, TokenSequence, TripletMask, PLACEHOLDERS};

/// A tuple that could not be aligned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTuple {
    pub index: usize,
    /// Tuple tokens left without a sentence token.
    pub unmatched: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignOutput {
    /// The sentence with placeholders appended.
    pub seq: TokenSequence,
    /// One mask per aligned tuple; identical masks are kept once.
    pub grid: LabelGrid,
    /// Index of the source tuple of each mask.
    pub tuple_of_mask: Vec<usize>,
    pub skipped: Vec<SkippedTuple>,
    /// Tuples whose mask duplicated an earlier one.
    pub duplicates: Vec<usize>,
}

fn part_tokens(part: &str) -> Vec<String> {
    match tokenize(part, false) {
        Ok(seq) => seq.tokens().to_vec(),
        Err(_) => Vec::new(),
    }
}

/// Placeholder standing in for a bare tuple word, if any.
fn placeholder_for(word: &str) -> Option<&'static str> {
    let lower = word.to_lowercase();
    PLACEHOLDERS.iter().copied().find(|p| p[1..p.len() - 1] == lower)
}

/// Aligns one tuple. Repeatedly takes the longest contiguous run of
/// still-unmatched tokens of any part that equals a run of still-unused
/// sentence tokens, labelling those sentence tokens with the part's class.
/// Ties go to the earliest sentence position, then the earlier part, then
/// the earlier part position. Leftover "is", "from" and "to" then take the
/// matching unused placeholder. Returns the unmatched tokens on failure.
fn align_tuple(seq: &TokenSequence, parts: [Vec<String>; 3]) -> Result<TripletMask, Vec<String>> {
    const CLASSES: [TokenClass; 3] = [TokenClass::Subject, TokenClass::Relation, TokenClass::Object];
    let sent = seq.tokens();
    let mut used = vec![false; sent.len()];
    let mut left: [Vec<bool>; 3] = parts.clone().map(|p| vec![true; p.len()]);
    let mut mask = TripletMask::background(sent.len());

    loop {
        // (len, sentence start, part, part start)
        let mut best: Option<(usize, usize, usize, usize)> = None;
        for s in 0..sent.len() {
            if used[s] {
                continue;
            }
            for k in 0..3 {
                for a in 0..parts[k].len() {
                    let mut l = 0;
                    while a + l < parts[k].len()
                        && s + l < sent.len()
                        && left[k][a + l]
                        && !used[s + l]
                        && parts[k][a + l] == sent[s + l]
                    {
                        l += 1;
                    }
                    if l > 0 && best.is_none_or(|b| l > b.0) {
                        best = Some((l, s, k, a));
                    }
                }
            }
        }
        let Some((l, s, k, a)) = best else { break };
        for i in 0..l {
            used[s + i] = true;
            left[k][a + i] = false;
            mask.labels_mut()[s + i] = CLASSES[k];
        }
    }

    let mut unmatched = Vec::new();
    for k in 0..3 {
        for a in 0..parts[k].len() {
            if !left[k][a] {
                continue;
            }
            let slot = placeholder_for(&parts[k][a])
                .and_then(|p| (0..sent.len()).find(|&s| !used[s] && seq.is_placeholder(s) && sent[s] == p));
            match slot {
                Some(s) => {
                    used[s] = true;
                    left[k][a] = false;
                    mask.labels_mut()[s] = CLASSES[k];
                }
                None => unmatched.push(parts[k][a].clone()),
            }
        }
    }
    if unmatched.is_empty() {
        Ok(mask)
    } else {
        Err(unmatched)
    }
}

/// Tokenizes the sentence with placeholders and aligns every tuple to a
/// mask. Tuples with tokens absent from the sentence are skipped.
pub fn lcs_align(record: &GenerativeRecord) -> Result<AlignOutput, TokenError> {
    let seq = tokenize(&record.sentence, true)?;
    let mut grid = LabelGrid::empty(seq.len());
    let mut tuple_of_mask = Vec::new();
    let mut skipped = Vec::new();
    let mut duplicates = Vec::new();
    for (index, tuple) in record.tuples.iter().enumerate() {
        let parts = tuple.parts().map(part_tokens);
        if parts.iter().all(Vec::is_empty) {
            skipped.push(SkippedTuple { index, unmatched: vec!["<empty tuple>".to_string()] });
            continue;
        }
        match align_tuple(&seq, parts) {
            Ok(mask) => {
                if grid.push_unique(mask)? {
                    tuple_of_mask.push(index);
                } else {
                    duplicates.push(index);
                }
            }
            Err(unmatched) => skipped.push(SkippedTuple { index, unmatched }),
        }
    }
    Ok(AlignOutput { seq, grid, tuple_of_mask, skipped, duplicates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::{Extraction, TokenClass::*};

    fn record(sentence: &str, tuples: &[(&str, &str, &str)]) -> GenerativeRecord {
        GenerativeRecord {
            sentence: sentence.to_string(),
            tuples: tuples.iter().map(|&(a, r, b)| Extraction::new(a, r, b)).collect(),
        }
    }

    #[test]
    fn simple_sentence() {
        let out = lcs_align(&record("Albert Einstein is physicist", &[("Albert Einstein", "is", "physicist")])).unwrap();
        assert_eq!(out.grid.masks()[0].labels(), &[Subject, Subject, Relation, Object, Background, Background, Background]);
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn bracketed_placeholder_in_tuple() {
        let out = lcs_align(&record("Obama born in Hawaii", &[("Obama", "[is] born in", "Hawaii")])).unwrap();
        let labels = out.grid.masks()[0].labels();
        assert_eq!(labels, &[Subject, Relation, Relation, Object, Relation, Background, Background]);
    }

    #[test]
    fn bare_word_falls_back_to_placeholder() {
        let out = lcs_align(&record("Obama , born in Hawaii", &[("Obama", "is born in", "Hawaii")])).unwrap();
        assert_eq!(out.grid.masks()[0].labels()[5], Relation);
        assert_eq!(out.seq.token(5), "[is]");
    }

    #[test]
    fn unmatched_word_skips_tuple() {
        let out = lcs_align(&record(
            "Einstein moved to Princeton",
            &[("Einstein", "moved to", "Princeton"), ("Einstein", "moved from to", "Ulm")],
        ))
        .unwrap();
        assert_eq!(out.grid.len(), 1);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].index, 1);
        assert_eq!(out.skipped[0].unmatched, vec!["Ulm".to_string()]);
    }

    #[test]
    fn second_from_has_no_placeholder_left() {
        let out = lcs_align(&record("Einstein went Ulm", &[("Einstein", "went from from", "Ulm")])).unwrap();
        assert_eq!(out.skipped[0].unmatched, vec!["from".to_string()]);
    }

    #[test]
    fn longest_run_wins_over_earlier_short_match() {
        // "the" appears twice; the arg2 run "the city of Ulm" claims the second one.
        let out = lcs_align(&record("the man left the city of Ulm", &[("the man", "left", "the city of Ulm")])).unwrap();
        let labels = out.grid.masks()[0].labels();
        assert_eq!(&labels[..7], &[Subject, Subject, Relation, Object, Object, Object, Object]);
    }

    #[test]
    fn duplicate_tuples_collapse() {
        let out = lcs_align(&record("a b c", &[("a", "b", "c"), ("a", "b", "c")])).unwrap();
        assert_eq!(out.grid.len(), 1);
        assert_eq!(out.duplicates, vec![1]);
    }
}
