//! Order-agnostic set loss.
//!
//! Every prediction slot is compared to every gold mask with a smooth
//! (probability-weighted) IoU. The slot/gold assignment maximising the summed
//! IoU is found with the Hungarian method, matched slots are trained towards
//! their gold mask with class-weighted cross-entropy, and every unmatched slot
//! is trained towards the all-Background mask. The assignment is held
//! constant when differentiating.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prediction::PredictionTensor;
use crate::tokens::{LabelGrid, TokenClass, TripletMask, NUM_CLASSES};

/// Lower clamp applied to probabilities inside the logarithm.
pub const LOG_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("{gold} gold triplets but only {slots} prediction slots")]
    TooManyGold { gold: usize, slots: usize },
    #[error("invalid loss configuration: {0}")]
    Config(&'static str),
}

/// How per-cell losses are reduced to a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Mean over all T·N cells.
    #[default]
    Mean,
    /// Sum divided by the summed class weights of the targets.
    WeightedMean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Cross-entropy weights indexed by [`TokenClass::index`].
    pub class_weights: [f64; NUM_CLASSES],
    pub exclude_background_in_iou: bool,
    pub reduction: Reduction,
    /// Focal-loss exponent; `None` is plain cross-entropy.
    pub focal_gamma: Option<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            class_weights: [1.0, 2.0, 2.0, 2.0],
            exclude_background_in_iou: true,
            reduction: Reduction::Mean,
            focal_gamma: None,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if self.class_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MatchError::Config("class weights must be finite and non-negative"));
        }
        if let Some(g) = self.focal_gamma {
            if !g.is_finite() || g < 0.0 {
                return Err(MatchError::Config("focal gamma must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Smooth IoU between one slot's (T, C) probabilities and a gold mask.
///
/// `I = Σ p·l`, `U = Σ p + Σ l − I`, restricted to non-Background classes when
/// `exclude_background` is set. Returns 0 when `U = 0`.
pub fn smooth_iou(p_slot: &[f64], gold: &[TokenClass], exclude_background: bool) -> Result<f64, MatchError> {
    if p_slot.len() != gold.len() * NUM_CLASSES {
        return Err(MatchError::Shape("slot probabilities must be T x 4 for a T-token mask"));
    }
    let first = usize::from(exclude_background);
    let mut inter = 0.0;
    let mut p_sum = 0.0;
    let mut l_sum = 0.0;
    for (row, &label) in p_slot.chunks_exact(NUM_CLASSES).zip(gold) {
        for c in first..NUM_CLASSES {
            p_sum += row[c];
        }
        if label.index() >= first {
            l_sum += 1.0;
            inter += row[label.index()];
        }
    }
    let union = p_sum + l_sum - inter;
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Dense rows × cols matrix of similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, MatchError> {
        if values.len() != rows * cols {
            return Err(MatchError::Shape("similarity values do not match rows x cols"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MatchError::Shape("similarity values must be finite"));
        }
        Ok(SimilarityMatrix { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        SimilarityMatrix { rows, cols, values }
    }

    /// Number of prediction slots (N).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of gold masks (M).
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn transposed(&self) -> Self {
        SimilarityMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }
}

/// Smooth IoU of every (slot, gold mask) pair.
pub fn similarity_matrix(p: &PredictionTensor, gold: &LabelGrid, cfg: &LossConfig) -> Result<SimilarityMatrix, MatchError> {
    if gold.seq_len() != p.seq_len() {
        return Err(MatchError::Shape("gold grid and prediction differ in sequence length"));
    }
    let slots: Vec<Vec<f64>> = (0..p.slots()).map(|n| p.slot(n)).collect();
    let mut values = Vec::with_capacity(p.slots() * gold.len());
    for slot in &slots {
        for mask in gold.masks() {
            values.push(smooth_iou(slot, mask.labels(), cfg.exclude_background_in_iou)?);
        }
    }
    SimilarityMatrix::new(p.slots(), gold.len(), values)
}

/// A matching between prediction slots (rows) and gold masks (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(slot, gold)` pairs sorted by gold index.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Assignment {
    pub fn empty() -> Self {
        Assignment { pairs: Vec::new(), total: 0.0 }
    }

    pub fn gold_for_slot(&self, slot: usize) -> Option<usize> {
        self.pairs.iter().find(|(s, _)| *s == slot).map(|&(_, g)| g)
    }

    pub fn slot_for_gold(&self, gold: usize) -> Option<usize> {
        self.pairs.iter().find(|(_, g)| *g == gold).map(|&(s, _)| s)
    }
}

/// Maximum-weight assignment covering every column, using the
/// shortest-augmenting-path Hungarian method in O(M²·N).
///
/// Requires rows ≥ cols. Ties resolve deterministically: at each step the
/// lowest candidate index wins.
pub fn hungarian_max(sim: &SimilarityMatrix) -> Result<Assignment, MatchError> {
    let (n_slots, n_gold) = (sim.rows(), sim.cols());
    if n_gold > n_slots {
        return Err(MatchError::TooManyGold { gold: n_gold, slots: n_slots });
    }
    if n_gold == 0 {
        return Ok(Assignment::empty());
    }
    // Minimise -sim with gold masks as the (fewer) "workers" and slots as jobs,
    // 1-based with index 0 as the virtual root.
    let cost = |g: usize, s: usize| -sim.get(s - 1, g - 1);
    let mut u = vec![0.0; n_gold + 1];
    let mut v = vec![0.0; n_slots + 1];
    let mut owner = vec![0usize; n_slots + 1];
    let mut way = vec![0usize; n_slots + 1];
    for g in 1..=n_gold {
        owner[0] = g;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n_slots + 1];
        let mut used = vec![false; n_slots + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n_slots {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n_slots {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=n_slots)
        .filter(|&j| owner[j] != 0)
        .map(|j| (j - 1, owner[j] - 1))
        .collect();
    pairs.sort_by_key(|&(_, g)| g);
    let total = pairs.iter().map(|&(s, g)| sim.get(s, g)).sum();
    Ok(Assignment { pairs, total })
}

/// Loss value together with the assignment that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub assignment: Assignment,
}

/// Matches slots to gold masks. With no gold masks every slot is unmatched.
pub fn match_slots(p: &PredictionTensor, gold: &LabelGrid, cfg: &LossConfig) -> Result<Assignment, MatchError> {
    if gold.seq_len() != p.seq_len() {
        return Err(MatchError::Shape("gold grid and prediction differ in sequence length"));
    }
    if gold.len() > p.slots() {
        return Err(MatchError::TooManyGold { gold: gold.len(), slots: p.slots() });
    }
    if gold.is_empty() {
        return Ok(Assignment::empty());
    }
    hungarian_max(&similarity_matrix(p, gold, cfg)?)
}

/// Target class of every (t, n) cell under a fixed assignment, laid out t-major.
pub fn slot_targets(p: &PredictionTensor, gold: &LabelGrid, assignment: &Assignment) -> Vec<TokenClass> {
    let (t_len, slots) = (p.seq_len(), p.slots());
    let mut targets = vec![TokenClass::Background; t_len * slots];
    for &(n, m) in &assignment.pairs {
        let mask: &TripletMask = &gold.masks()[m];
        for t in 0..t_len {
            targets[t * slots + n] = mask.labels()[t];
        }
    }
    targets
}

fn cell_loss(prob: f64, weight: f64, gamma: Option<f64>) -> f64 {
    let nll = -libm::log(prob.max(LOG_EPSILON));
    match gamma {
        None => weight * nll,
        Some(g) => weight * libm::pow((1.0 - prob).max(0.0), g) * nll,
    }
}

fn cell_grad(prob: f64, weight: f64, gamma: Option<f64>) -> f64 {
    let clamped = prob.max(LOG_EPSILON);
    let dq = if prob > LOG_EPSILON { 1.0 } else { 0.0 };
    match gamma {
        None => -weight * dq / clamped,
        Some(g) => {
            let one_minus = (1.0 - prob).max(0.0);
            let focal = libm::pow(one_minus, g);
            let dfocal = if g == 0.0 { 0.0 } else { -g * libm::pow(one_minus, g - 1.0) };
            -weight * (dfocal * libm::log(clamped) + focal * dq / clamped)
        }
    }
}

fn reduction_scale(targets: &[TokenClass], cfg: &LossConfig) -> f64 {
    match cfg.reduction {
        Reduction::Mean => 1.0 / targets.len().max(1) as f64,
        Reduction::Sum => 1.0,
        Reduction::WeightedMean => {
            let total: f64 = targets.iter().map(|c| cfg.class_weights[c.index()]).sum();
            if total > 0.0 {
                1.0 / total
            } else {
                0.0
            }
        }
    }
}

/// Loss under a caller-supplied assignment.
pub fn loss_with_assignment(
    p: &PredictionTensor,
    gold: &LabelGrid,
    assignment: &Assignment,
    cfg: &LossConfig,
) -> Result<f64, MatchError> {
    cfg.validate()?;
    if gold.seq_len() != p.seq_len() {
        return Err(MatchError::Shape("gold grid and prediction differ in sequence length"));
    }
    let targets = slot_targets(p, gold, assignment);
    let scale = reduction_scale(&targets, cfg);
    let probs = p.as_slice();
    let sum: f64 = targets
        .iter()
        .enumerate()
        .map(|(cell, c)| cell_loss(probs[cell * NUM_CLASSES + c.index()], cfg.class_weights[c.index()], cfg.focal_gamma))
        .sum();
    Ok(sum * scale)
}

/// Gradient of [`loss_with_assignment`] with respect to the probabilities.
pub fn gradient_with_assignment(
    p: &PredictionTensor,
    gold: &LabelGrid,
    assignment: &Assignment,
    cfg: &LossConfig,
) -> Result<Vec<f64>, MatchError> {
    cfg.validate()?;
    if gold.seq_len() != p.seq_len() {
        return Err(MatchError::Shape("gold grid and prediction differ in sequence length"));
    }
    let targets = slot_targets(p, gold, assignment);
    let scale = reduction_scale(&targets, cfg);
    let probs = p.as_slice();
    let mut grad = vec![0.0; probs.len()];
    for (cell, c) in targets.iter().enumerate() {
        let idx = cell * NUM_CLASSES + c.index();
        grad[idx] = scale * cell_grad(probs[idx], cfg.class_weights[c.index()], cfg.focal_gamma);
    }
    Ok(grad)
}

/// Matched slots are trained towards their gold mask, unmatched ones towards
/// all-Background.
pub fn order_agnostic_loss(p: &PredictionTensor, gold: &LabelGrid, cfg: &LossConfig) -> Result<LossOutput, MatchError> {
    let assignment = match_slots(p, gold, cfg)?;
    let loss = loss_with_assignment(p, gold, &assignment, cfg)?;
    Ok(LossOutput { loss, assignment })
}

/// Gradient of the loss with the assignment treated as a constant.
pub fn loss_gradient(p: &PredictionTensor, gold: &LabelGrid, cfg: &LossConfig) -> Result<Vec<f64>, MatchError> {
    let assignment = match_slots(p, gold, cfg)?;
    gradient_with_assignment(p, gold, &assignment, cfg)
}

/// Loss, assignment and gradient from a single matching pass.
pub fn loss_and_gradient(
    p: &PredictionTensor,
    gold: &LabelGrid,
    cfg: &LossConfig,
) -> Result<(LossOutput, Vec<f64>), MatchError> {
    let assignment = match_slots(p, gold, cfg)?;
    let loss = loss_with_assignment(p, gold, &assignment, cfg)?;
    let grad = gradient_with_assignment(p, gold, &assignment, cfg)?;
    Ok((LossOutput { loss, assignment }, grad))
}
