use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokens::{TokenClass, TripletMask, NUM_CLASSES};

/// Tolerance on per-cell probability sums.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("expected {expected} values for shape ({t}, {n}, 4), got {got}")]
    Shape { t: usize, n: usize, expected: usize, got: usize },
    #[error("probability at (t={t}, n={n}, c={c}) is {value}, outside [0, 1]")]
    OutOfRange { t: usize, n: usize, c: usize, value: f64 },
    #[error("probabilities at (t={t}, n={n}) sum to {sum}")]
    NotNormalized { t: usize, n: usize, sum: f64 },
}

/// Per-token, per-slot class probabilities of shape (T, N, C), stored
/// row-major with the class axis innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTensor {
    seq_len: usize,
    slots: usize,
    probs: Vec<f64>,
}

impl PredictionTensor {
    pub fn new(seq_len: usize, slots: usize, probs: Vec<f64>) -> Result<Self, TensorError> {
        let expected = seq_len * slots * NUM_CLASSES;
        if probs.len() != expected {
            return Err(TensorError::Shape { t: seq_len, n: slots, expected, got: probs.len() });
        }
        for (cell, row) in probs.chunks_exact(NUM_CLASSES).enumerate() {
            let (t, n) = (cell / slots, cell % slots);
            for (c, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(TensorError::OutOfRange { t, n, c, value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(TensorError::NotNormalized { t, n, sum });
            }
        }
        Ok(PredictionTensor { seq_len, slots, probs })
    }

    /// Wraps values already known to be valid (softmax outputs).
    pub(crate) fn new_unchecked(seq_len: usize, slots: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), seq_len * slots * NUM_CLASSES);
        PredictionTensor { seq_len, slots, probs }
    }

    /// Applies a softmax over the class axis of raw scores laid out like `probs`.
    pub fn from_logits(seq_len: usize, slots: usize, logits: &[f64]) -> Result<Self, TensorError> {
        let expected = seq_len * slots * NUM_CLASSES;
        if logits.len() != expected {
            return Err(TensorError::Shape { t: seq_len, n: slots, expected, got: logits.len() });
        }
        let mut probs = Vec::with_capacity(expected);
        for row in logits.chunks_exact(NUM_CLASSES) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: [f64; NUM_CLASSES] = core::array::from_fn(|c| libm::exp(row[c] - max));
            let z: f64 = exps.iter().sum();
            probs.extend(exps.iter().map(|e| e / z));
        }
        Ok(PredictionTensor { seq_len, slots, probs })
    }

    /// Uniform distribution in every cell.
    pub fn uniform(seq_len: usize, slots: usize) -> Self {
        PredictionTensor {
            seq_len,
            slots,
            probs: alloc::vec![1.0 / NUM_CLASSES as f64; seq_len * slots * NUM_CLASSES],
        }
    }

    /// One-hot tensor whose slot `n` encodes `masks[n]`; remaining slots are
    /// all-Background.
    pub fn one_hot(seq_len: usize, slots: usize, masks: &[&TripletMask]) -> Self {
        let mut probs = alloc::vec![0.0; seq_len * slots * NUM_CLASSES];
        for t in 0..seq_len {
            for n in 0..slots {
                let class = masks.get(n).map_or(TokenClass::Background, |m| m.labels()[t]);
                probs[(t * slots + n) * NUM_CLASSES + class.index()] = 1.0;
            }
        }
        PredictionTensor { seq_len, slots, probs }
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn offset(&self, t: usize, n: usize) -> usize {
        (t * self.slots + n) * NUM_CLASSES
    }

    #[inline]
    pub fn get(&self, t: usize, n: usize, c: usize) -> f64 {
        self.probs[self.offset(t, n) + c]
    }

    /// Class distribution of cell (t, n).
    pub fn cell(&self, t: usize, n: usize) -> &[f64] {
        let o = self.offset(t, n);
        &self.probs[o..o + NUM_CLASSES]
    }

    /// The (T, C) probabilities of one slot, copied out contiguously.
    pub fn slot(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.seq_len * NUM_CLASSES);
        for t in 0..self.seq_len {
            out.extend_from_slice(self.cell(t, n));
        }
        out
    }

    /// Argmax class per token of slot `n`; ties go to the lower class index.
    pub fn argmax_mask(&self, n: usize) -> TripletMask {
        let labels = (0..self.seq_len)
            .map(|t| {
                let cell = self.cell(t, n);
                let mut best = 0;
                for c in 1..NUM_CLASSES {
                    if cell[c] > cell[best] {
                        best = c;
                    }
                }
                TokenClass::ALL[best]
            })
            .collect();
        TripletMask::new(labels)
    }

    /// Same tensor with slots reordered; new slot k is old slot `order[k]`.
    pub fn permute_slots(&self, order: &[usize]) -> Self {
        let mut probs = Vec::with_capacity(self.probs.len());
        for t in 0..self.seq_len {
            for &src in order {
                probs.extend_from_slice(self.cell(t, src));
            }
        }
        PredictionTensor { seq_len: self.seq_len, slots: order.len(), probs }
    }

    /// Convex combination `(1 - alpha) * self + alpha * other`.
    pub fn lerp(&self, other: &PredictionTensor, alpha: f64) -> Self {
        assert_eq!(self.probs.len(), other.probs.len());
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        PredictionTensor { seq_len: self.seq_len, slots: self.slots, probs }
    }
}
