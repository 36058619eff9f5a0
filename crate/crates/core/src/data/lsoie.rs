use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ConvertedRecord;
use crate::tokens::{LabelGrid, TokenClass, TokenError, TokenSequence, TripletMask};

/// One CoNLL block: tokens plus one tag column per annotated tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConllRecord {
    pub tokens: Vec<String>,
    /// `layers[k][t]` is the tag of token t in tuple k.
    pub layers: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LsoieOutcome {
    Converted {
        record: ConvertedRecord,
        /// Layers dropped for lacking a predicate, A0 or a higher argument.
        rejected_layers: Vec<(usize, String)>,
    },
    Rejected {
        reasons: Vec<(usize, String)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Predicate,
    Arg(u32),
}

fn parse_tag(tag: &str) -> Result<Option<(Role, bool)>, String> {
    if tag == "O" {
        return Ok(None);
    }
    let (role, pos) = tag.rsplit_once('-').ok_or_else(|| format!("unknown tag '{tag}'"))?;
    let begin = match pos {
        "B" => true,
        "I" => false,
        _ => return Err(format!("unknown tag '{tag}'")),
    };
    let role = if role == "P" {
        Role::Predicate
    } else if let Some(n) = role.strip_prefix('A').and_then(|n| n.parse::<u32>().ok()) {
        Role::Arg(n)
    } else {
        return Err(format!("unknown tag '{tag}'"));
    };
    Ok(Some((role, begin)))
}

/// Converts one tag layer into a triplet mask: P to Relation, A0 to Subject,
/// every higher argument to Object. The inner error names what is missing
/// when the predicate, A0 or all higher arguments are absent.
fn convert_layer(layer: &[String], len: usize) -> Result<Result<TripletMask, String>, String> {
    let mut mask = TripletMask::background(len);
    let mut prev: Option<Role> = None;
    let (mut has_p, mut has_a0, mut has_obj) = (false, false, false);
    for (t, tag) in layer.iter().enumerate() {
        let parsed = parse_tag(tag).map_err(|e| format!("token {t}: {e}"))?;
        let Some((role, begin)) = parsed else {
            prev = None;
            continue;
        };
        if !begin && prev != Some(role) {
            return Err(format!("token {t}: '{tag}' does not continue a span of the same role"));
        }
        prev = Some(role);
        mask.labels_mut()[t] = match role {
            Role::Predicate => {
                has_p = true;
                TokenClass::Relation
            }
            Role::Arg(0) => {
                has_a0 = true;
                TokenClass::Subject
            }
            Role::Arg(_) => {
                has_obj = true;
                TokenClass::Object
            }
        };
    }
    let missing: Vec<&str> = [(has_p, "predicate"), (has_a0, "A0"), (has_obj, "argument beyond A0")]
        .into_iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, name)| name)
        .collect();
    if missing.is_empty() {
        Ok(Ok(mask))
    } else {
        Ok(Err(format!("missing {}", missing.join(", "))))
    }
}

/// Converts every tag layer of a record; placeholders are appended to the
/// token sequence. Malformed tags fail the whole record.
pub fn lsoie_convert(record: &ConllRecord) -> Result<LsoieOutcome, TokenError> {
    if record.tokens.is_empty() {
        return Err(TokenError::EmptyInput);
    }
    let mut seq = TokenSequence::from_tokens(record.tokens.iter().cloned());
    seq.append_placeholders();
    let mut grid = LabelGrid::empty(seq.len());
    let mut rejected = Vec::new();
    for (k, layer) in record.layers.iter().enumerate() {
        if layer.len() != record.tokens.len() {
            return Err(TokenError::BadAnnotation(format!(
                "layer {k} has {} tags for {} tokens",
                layer.len(),
                record.tokens.len()
            )));
        }
        match convert_layer(layer, seq.len()).map_err(|e| TokenError::BadAnnotation(format!("layer {k}, {e}")))? {
            Ok(mask) => {
                grid.push_unique(mask)?;
            }
            Err(reason) => rejected.push((k, reason)),
        }
    }
    if grid.is_empty() {
        if rejected.is_empty() {
            rejected.push((0, "no annotation layers".to_string()));
        }
        return Ok(LsoieOutcome::Rejected { reasons: rejected });
    }
    Ok(LsoieOutcome::Converted { record: ConvertedRecord { seq, grid }, rejected_layers: rejected })
}

/// Merges records sharing a token sequence (one tuple per block is common),
/// preserving first-appearance order, then converts each.
pub fn convert_conll_corpus(records: &[ConllRecord]) -> Vec<(usize, Result<LsoieOutcome, TokenError>)> {
    let mut merged: Vec<(usize, ConllRecord)> = Vec::new();
    let mut index: BTreeMap<&[String], usize> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        match index.get(r.tokens.as_slice()) {
            Some(&k) => merged[k].1.layers.extend(r.layers.iter().cloned()),
            None => {
                index.insert(r.tokens.as_slice(), merged.len());
                merged.push((i, r.clone()));
            }
        }
    }
    merged.into_iter().map(|(i, r)| (i, lsoie_convert(&r))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::TokenClass::*;
    use alloc::vec;

    fn rec(tokens: &str, layers: &[&str]) -> ConllRecord {
        ConllRecord {
            tokens: tokens.split(' ').map(String::from).collect(),
            layers: layers.iter().map(|l| l.split(' ').map(String::from).collect()).collect(),
        }
    }

    fn converted(o: LsoieOutcome) -> ConvertedRecord {
        match o {
            LsoieOutcome::Converted { record, .. } => record,
            other => panic!("expected conversion, got {other:?}"),
        }
    }

    #[test]
    fn predicate_subject_object() {
        let r = rec("John ate an apple", &["A0-B P-B A1-B A1-I"]);
        let c = converted(lsoie_convert(&r).unwrap());
        assert_eq!(c.seq.len(), 7);
        assert_eq!(&c.grid.masks()[0].labels()[..4], &[Subject, Relation, Object, Object]);
    }

    #[test]
    fn higher_arguments_merge_into_object() {
        let r = rec("John gave Mary a book", &["A0-B P-B A2-B A1-B A1-I"]);
        let c = converted(lsoie_convert(&r).unwrap());
        assert_eq!(&c.grid.masks()[0].labels()[..5], &[Subject, Relation, Object, Object, Object]);
    }

    #[test]
    fn missing_higher_argument_rejects() {
        let r = rec("John slept", &["A0-B P-B"]);
        match lsoie_convert(&r).unwrap() {
            LsoieOutcome::Rejected { reasons } => assert!(reasons[0].1.contains("argument beyond A0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_tags() {
        assert!(matches!(lsoie_convert(&rec("a b", &["A0-B A1-I"])), Err(TokenError::BadAnnotation(_))));
        assert!(matches!(lsoie_convert(&rec("a b", &["O X-B"])), Err(TokenError::BadAnnotation(_))));
        assert!(matches!(lsoie_convert(&rec("a b", &["O"])), Err(TokenError::BadAnnotation(_))));
    }

    #[test]
    fn corpus_merges_blocks_of_one_sentence() {
        let recs = vec![
            rec("John ate and left", &["A0-B P-B O O"]),
            rec("John ate and left", &["A0-B P-B O A1-B"]),
            rec("Mary sang", &["A0-B P-B"]),
        ];
        let out = convert_conll_corpus(&recs);
        assert_eq!(out.len(), 2);
        let first = converted(out[0].1.clone().unwrap());
        assert_eq!(first.grid.len(), 1);
        assert!(matches!(out[1].1, Ok(LsoieOutcome::Rejected { .. })));
    }
}
