use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::prediction::PredictionTensor;
use crate::tokens::{mask_to_extraction, Extraction, LabelGrid, TokenError, TokenSequence, TripletMask, NUM_CLASSES};

/// How per-token probabilities of a decoded mask become one confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceAggregator {
    /// Smallest argmax probability over the labelled tokens.
    #[default]
    Min,
    /// Exponent of the mean log argmax probability.
    GeometricMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    /// Drop masks lacking a subject, relation or object token.
    pub require_all_parts: bool,
    /// Keep only the lowest slot of identical masks.
    pub dedup: bool,
    pub aggregator: ConfidenceAggregator,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { require_all_parts: true, dedup: true, aggregator: ConfidenceAggregator::Min }
    }
}

/// Confidence of a decoded mask from its slot's (T, C) probabilities.
pub fn confidence(p_slot: &[f64], mask: &TripletMask, aggregator: ConfidenceAggregator) -> Result<f64, TokenError> {
    if p_slot.len() != mask.len() * NUM_CLASSES {
        return Err(TokenError::LengthMismatch { mask: mask.len(), seq: p_slot.len() / NUM_CLASSES });
    }
    let probs = mask
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_background())
        .map(|(t, c)| p_slot[t * NUM_CLASSES + c.index()]);
    match aggregator {
        ConfidenceAggregator::Min => probs.reduce(f64::min).ok_or(TokenError::NoTriplet),
        ConfidenceAggregator::GeometricMean => {
            let (sum, count) = probs.fold((0.0, 0usize), |(s, n), p| (s + libm::log(p.max(1e-300)), n + 1));
            if count == 0 {
                Err(TokenError::NoTriplet)
            } else {
                Ok(libm::exp(sum / count as f64).clamp(0.0, 1.0))
            }
        }
    }
}

/// One surviving slot after decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSlot {
    pub slot: usize,
    pub mask: TripletMask,
    pub extraction: Extraction,
}

/// Argmax masks of every slot, Background-only ones included.
pub fn argmax_grid(p: &PredictionTensor) -> LabelGrid {
    let masks = (0..p.slots()).map(|n| p.argmax_mask(n)).collect();
    LabelGrid::new(p.seq_len(), masks).expect("argmax masks have the tensor's length")
}

pub fn decode_slots(p: &PredictionTensor, seq: &TokenSequence, cfg: &DecodeConfig) -> Vec<DecodedSlot> {
    let mut out: Vec<DecodedSlot> = Vec::new();
    for n in 0..p.slots() {
        let mask = p.argmax_mask(n);
        if mask.is_background() || (cfg.require_all_parts && !mask.is_complete()) {
            continue;
        }
        if cfg.dedup && out.iter().any(|d| d.mask == mask) {
            continue;
        }
        let Ok(ex) = mask_to_extraction(seq, &mask) else { continue };
        let conf = confidence(&p.slot(n), &mask, cfg.aggregator).unwrap_or(0.0);
        out.push(DecodedSlot { slot: n, mask, extraction: ex.with_confidence(conf) });
    }
    out
}

/// Per-slot argmax, Background-only filtering, optional presence rule and
/// dedup, then conversion to extractions with confidences.
pub fn decode(p: &PredictionTensor, seq: &TokenSequence, require_all_parts: bool) -> Vec<Extraction> {
    let cfg = DecodeConfig { require_all_parts, ..DecodeConfig::default() };
    decode_with(p, seq, &cfg)
}

pub fn decode_with(p: &PredictionTensor, seq: &TokenSequence, cfg: &DecodeConfig) -> Vec<Extraction> {
    decode_slots(p, seq, cfg).into_iter().map(|d| d.extraction).collect()
}
