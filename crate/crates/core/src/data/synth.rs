use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tokens::{grid_from_tuples, tokenize, Extraction, LabelGrid, TokenError, TokenSequence, TripletSpans};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// One triplet and a final period.
    Single,
    /// Two triplets joined by a conjunction.
    Pair,
    /// Three to five triplets joined by commas.
    CommaJoin,
    /// Two to nine triplets, each ending with a period.
    PeriodJoin,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] = [TemplateKind::Single, TemplateKind::Pair, TemplateKind::CommaJoin, TemplateKind::PeriodJoin];

    /// Inclusive range of triplet counts.
    pub fn arity(self) -> (usize, usize) {
        match self {
            TemplateKind::Single => (1, 1),
            TemplateKind::Pair => (2, 2),
            TemplateKind::CommaJoin => (3, 5),
            TemplateKind::PeriodJoin => (2, 9),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TemplateKind::Single => "single",
            TemplateKind::Pair => "pair",
            TemplateKind::CommaJoin => "comma_join",
            TemplateKind::PeriodJoin => "period_join",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub kind: TemplateKind,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Es,
    Pt,
}

impl Language {
    pub fn conjunctions(self) -> &'static [&'static str] {
        match self {
            Language::En => &["while", "and"],
            Language::Es => &["mientras", "y"],
            Language::Pt => &["enquanto", "e"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub templates: Vec<TemplateSpec>,
    pub conjunctions: Vec<String>,
    /// Resample sentences whose text was already generated.
    pub dedup_sentences: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::for_language(Language::En)
    }
}

impl SynthConfig {
    pub fn default_templates() -> Vec<TemplateSpec> {
        let p = [0.1, 0.2, 0.35, 0.35];
        TemplateKind::ALL.iter().zip(p).map(|(&kind, probability)| TemplateSpec { kind, probability }).collect()
    }

    pub fn for_language(lang: Language) -> Self {
        SynthConfig {
            templates: Self::default_templates(),
            conjunctions: lang.conjunctions().iter().map(|c| c.to_string()).collect(),
            dedup_sentences: false,
        }
    }

    /// Always uses one template kind.
    pub fn forced(mut self, kind: TemplateKind) -> Self {
        self.templates = vec![TemplateSpec { kind, probability: 1.0 }];
        self
    }

    /// Largest triplet count any template with positive probability needs.
    pub fn required_pool_size(&self) -> usize {
        self.templates.iter().filter(|t| t.probability > 0.0).map(|t| t.kind.arity().1).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.templates.is_empty() {
            return Err(SynthError::Config("no templates".into()));
        }
        if self.templates.iter().any(|t| !(t.probability.is_finite() && t.probability >= 0.0)) {
            return Err(SynthError::Config("template probabilities must be non-negative".into()));
        }
        let total: f64 = self.templates.iter().map(|t| t.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SynthError::Config(alloc::format!("template probabilities sum to {total}, not 1")));
        }
        let needs_conj = self.templates.iter().any(|t| t.kind == TemplateKind::Pair && t.probability > 0.0);
        if needs_conj && self.conjunctions.iter().all(|c| c.trim().is_empty()) {
            return Err(SynthError::Config("pair template needs at least one conjunction".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("triplet pool has {have} triplets, templates need {need}")]
    PoolTooSmall { have: usize, need: usize },
    #[error("could not produce {wanted} distinct sentences")]
    Exhausted { wanted: usize },
    #[error(transparent)]
    Token(#[from] TokenError),
}

/// Lexicalized (subject, relation, object) triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletPool {
    triples: Vec<Extraction>,
}

impl TripletPool {
    /// Drops exact duplicates; every part must be non-empty.
    pub fn new(triples: Vec<Extraction>) -> Result<Self, SynthError> {
        let mut out: Vec<Extraction> = Vec::with_capacity(triples.len());
        for (i, t) in triples.into_iter().enumerate() {
            if t.parts().iter().any(|p| p.trim().is_empty()) {
                return Err(SynthError::Config(alloc::format!("pool triple {i} has an empty part")));
            }
            if !out.iter().any(|o| o.same_triple(&t)) {
                out.push(Extraction::new(t.arg1.trim(), t.rel.trim(), t.arg2.trim()));
            }
        }
        Ok(TripletPool { triples: out })
    }

    pub fn triples(&self) -> &[Extraction] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSentence {
    pub sentence: String,
    pub template: TemplateKind,
    pub gold: Vec<Extraction>,
    /// Sentence tokens with placeholders appended.
    pub seq: TokenSequence,
    /// Exact gold masks, one per triplet in `gold` order.
    pub grid: LabelGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub sentences: Vec<SynthSentence>,
    /// Sentences per template, indexed by [`TemplateKind::index`].
    pub template_counts: [usize; 4],
}

impl SynthOutput {
    pub fn template_frequencies(&self) -> [f64; 4] {
        let n = self.sentences.len().max(1) as f64;
        self.template_counts.map(|c| c as f64 / n)
    }
}

fn tokens_of(part: &str) -> Result<Vec<String>, TokenError> {
    Ok(tokenize(part, false)?.tokens().to_vec())
}

fn render(kind: TemplateKind, triples: &[&Extraction], conjunction: &str) -> Result<(Vec<String>, Vec<TripletSpans>), TokenError> {
    let mut tokens: Vec<String> = Vec::new();
    let mut spans = Vec::with_capacity(triples.len());
    for (i, t) in triples.iter().enumerate() {
        if i > 0 {
            match kind {
                TemplateKind::Pair => tokens.extend(tokens_of(conjunction)?),
                TemplateKind::CommaJoin => tokens.push(",".to_string()),
                _ => {}
            }
        }
        let mut parts: [Vec<usize>; 3] = Default::default();
        for (k, text) in t.parts().iter().enumerate() {
            for tok in tokens_of(text)? {
                parts[k].push(tokens.len());
                tokens.push(tok);
            }
        }
        let [s, r, o] = parts;
        spans.push(TripletSpans::new(s, r, o));
        if kind == TemplateKind::PeriodJoin || i + 1 == triples.len() {
            tokens.push(".".to_string());
        }
    }
    Ok((tokens, spans))
}

/// Generates `n_sentences` template sentences from the pool. Each sentence
/// draws a template by probability, a triplet count uniformly within the
/// template's range and that many distinct triplets. Equal seeds give
/// identical output.
pub fn synth_generate(pool: &TripletPool, n_sentences: usize, seed: u64, cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let need = cfg.required_pool_size();
    if pool.len() < need {
        return Err(SynthError::PoolTooSmall { have: pool.len(), need });
    }
    let conjunctions: Vec<&str> = cfg.conjunctions.iter().map(|c| c.trim()).filter(|c| !c.is_empty()).collect();
    let weights = WeightedIndex::new(cfg.templates.iter().map(|t| t.probability))
        .map_err(|e| SynthError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences: Vec<SynthSentence> = Vec::with_capacity(n_sentences);
    let mut counts = [0usize; 4];
    let mut seen: alloc::collections::BTreeSet<String> = Default::default();
    let max_attempts = n_sentences.saturating_mul(100).max(1000);
    let mut attempts = 0;
    while sentences.len() < n_sentences {
        attempts += 1;
        if attempts > max_attempts {
            return Err(SynthError::Exhausted { wanted: n_sentences });
        }
        let kind = cfg.templates[weights.sample(&mut rng)].kind;
        let (lo, hi) = kind.arity();
        let k = rng.random_range(lo..=hi);
        let picked = rand::seq::index::sample(&mut rng, pool.len(), k);
        let triples: Vec<&Extraction> = picked.iter().map(|i| &pool.triples[i]).collect();
        let conjunction = if kind == TemplateKind::Pair { conjunctions[rng.random_range(0..conjunctions.len())] } else { "" };
        let (tokens, spans) = render(kind, &triples, conjunction)?;
        let sentence = tokens.join(" ");
        if cfg.dedup_sentences && !seen.insert(sentence.clone()) {
            continue;
        }
        let seq = tokenize(&sentence, true)?;
        debug_assert_eq!(&seq.tokens()[..tokens.len()], tokens.as_slice());
        let grid = grid_from_tuples(&seq, &spans)?;
        counts[kind.index()] += 1;
        let gold = triples.iter().map(|t| Extraction::new(t.arg1.clone(), t.rel.clone(), t.arg2.clone())).collect();
        sentences.push(SynthSentence { sentence, template: kind, gold, seq, grid });
    }
    Ok(SynthOutput { sentences, template_counts: counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::mask_to_extraction;

    fn pool(n: usize) -> TripletPool {
        TripletPool::new((0..n).map(|i| Extraction::new(alloc::format!("Subject {i}"), "is", alloc::format!("object {i}"))).collect()).unwrap()
    }

    #[test]
    fn forced_single_template() {
        let p = TripletPool::new(vec![Extraction::new("Albert Einstein", "is", "physicist")]).unwrap();
        let cfg = SynthConfig::default().forced(TemplateKind::Single);
        let out = synth_generate(&p, 1, 3, &cfg).unwrap();
        let s = &out.sentences[0];
        assert_eq!(s.sentence, "Albert Einstein is physicist .");
        assert_eq!(s.gold.len(), 1);
        assert_eq!(mask_to_extraction(&s.seq, &s.grid.masks()[0]).unwrap().parts(), ["Albert Einstein", "is", "physicist"]);
    }

    #[test]
    fn forced_pair_with_while() {
        let p = TripletPool::new(vec![
            Extraction::new("Albert Einstein", "is", "physicist"),
            Extraction::new("Amelia Mary Earhart", "is", "pilot"),
        ])
        .unwrap();
        let mut cfg = SynthConfig::default().forced(TemplateKind::Pair);
        cfg.conjunctions = vec!["while".into()];
        let out = synth_generate(&p, 1, 0, &cfg).unwrap();
        let s = &out.sentences[0];
        assert!(s.sentence.contains(" is physicist while ") || s.sentence.contains(" is pilot while "));
        assert!(s.sentence.ends_with(" ."));
        assert_eq!(s.gold.len(), 2);
        assert_eq!(s.grid.len(), 2);
    }

    #[test]
    fn pool_size_check() {
        let err = synth_generate(&pool(8), 1, 0, &SynthConfig::default()).unwrap_err();
        assert_eq!(err, SynthError::PoolTooSmall { have: 8, need: 9 });
        assert!(synth_generate(&pool(9), 5, 0, &SynthConfig::default()).is_ok());
    }

    #[test]
    fn arity_and_reproducibility() {
        let p = pool(12);
        let cfg = SynthConfig::default();
        let a = synth_generate(&p, 300, 42, &cfg).unwrap();
        let b = synth_generate(&p, 300, 42, &cfg).unwrap();
        assert_eq!(a, b);
        for s in &a.sentences {
            let (lo, hi) = s.template.arity();
            assert!((lo..=hi).contains(&s.gold.len()));
            assert_eq!(s.grid.len(), s.gold.len());
            for (m, g) in s.grid.masks().iter().zip(&s.gold) {
                assert!(mask_to_extraction(&s.seq, m).unwrap().same_triple(g));
            }
        }
    }

    #[test]
    fn bad_probabilities() {
        let mut cfg = SynthConfig::default();
        cfg.templates[0].probability = 0.5;
        assert!(matches!(cfg.validate(), Err(SynthError::Config(_))));
    }
}
