//! Mini-batch training with checkpoint selection on validation token
//! macro-F1.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::decode::argmax_grid;
use super::encoder::Encoder;
use super::graph::Graph;
use super::model::Tagger;
use super::optim::{Adam, AdamConfig};
use super::tensor::ParamStore;
use super::NnError;
use crate::eval::token_f1::{token_confusion, TokenConfusion};
use crate::matching::{loss_and_gradient, match_slots, LossConfig, MatchError};
use crate::prediction::PredictionTensor;
use crate::tokens::{LabelGrid, TokenSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Share of examples held out for checkpoint selection. When it rounds to
    /// zero examples, the training set itself is scored.
    pub validation_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            weight_decay: 1e-6,
            batch_size: 32,
            max_epochs: 30,
            seed: 0,
            validation_fraction: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) || !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(TrainError::Config("learning rate must be positive and weight decay non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(TrainError::Config("validation fraction must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !positive(self.epsilon) {
            return Err(TrainError::Config("invalid Adam moments configuration".into()));
        }
        self.loss.validate().map_err(TrainError::Match)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("example {example}: {reason}")]
    BadExample { example: usize, reason: String },
    #[error("non-finite loss {value} at epoch {epoch}, example {example}")]
    NonFinite { epoch: usize, example: usize, value: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Match(#[from] MatchError),
}

/// A tokenized sentence with its gold masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainExample {
    pub seq: TokenSequence,
    pub gold: LabelGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_f1: f64,
    /// Best validation score seen so far, this epoch included.
    pub best_macro_f1: f64,
    pub improved: bool,
}

pub struct TrainOutcome<E> {
    /// Model restored to the best validation checkpoint.
    pub model: Tagger<E>,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

/// Token confusion of the model's argmax masks over `examples`, with slots
/// matched to gold by the loss's assignment.
pub fn evaluate<E: Encoder>(model: &Tagger<E>, examples: &[&TrainExample], loss: &LossConfig) -> Result<TokenConfusion, TrainError> {
    let mut total = TokenConfusion::default();
    for (i, ex) in examples.iter().enumerate() {
        let p = model.forward(&ex.seq)?;
        if let Some(&value) = p.as_slice().iter().find(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite { epoch: 0, example: i, value });
        }
        let assignment = match_slots(&p, &ex.gold, loss)?;
        total.merge(&token_confusion(&argmax_grid(&p), &ex.gold, &assignment));
    }
    Ok(total)
}

fn check_finite(store: &ParamStore) -> Result<(), NnError> {
    for id in store.ids() {
        if let Some(index) = store.get(id).data.iter().position(|v| !v.is_finite()) {
            return Err(NnError::Numerical { param: id.0, index });
        }
    }
    Ok(())
}

/// Steps through epochs one at a time, so callers can persist checkpoints
/// as they improve.
pub struct Trainer<'a, E> {
    model: Tagger<E>,
    data: &'a [TrainExample],
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
    cfg: TrainConfig,
    adam: Adam,
    rng: ChaCha8Rng,
    epoch: usize,
    best: Option<(usize, f64, ParamStore)>,
    history: Vec<EpochMetrics>,
}

impl<'a, E: Encoder> Trainer<'a, E> {
    pub fn new(model: Tagger<E>, data: &'a [TrainExample], cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        for (i, ex) in data.iter().enumerate() {
            if ex.gold.seq_len() != ex.seq.len() {
                return Err(TrainError::BadExample { example: i, reason: "gold masks do not match the token count".into() });
            }
            if ex.gold.len() > model.slots() {
                return Err(TrainError::BadExample {
                    example: i,
                    reason: format!("{} gold triplets exceed {} slots", ex.gold.len(), model.slots()),
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let n_val = libm::round(data.len() as f64 * cfg.validation_fraction) as usize;
        let n_val = n_val.min(data.len() - 1);
        let val_idx = order[..n_val].to_vec();
        let train_idx = order[n_val..].to_vec();
        let adam = Adam::new(cfg.adam());
        Ok(Trainer { model, data, train_idx, val_idx, cfg, adam, rng, epoch: 0, best: None, history: Vec::new() })
    }

    pub fn model(&self) -> &Tagger<E> {
        &self.model
    }

    pub fn history(&self) -> &[EpochMetrics] {
        &self.history
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Indices of the held-out examples (empty when the training set is scored).
    pub fn validation_indices(&self) -> &[usize] {
        &self.val_idx
    }

    /// Runs one epoch and scores the validation set.
    pub fn run_epoch(&mut self) -> Result<EpochMetrics, TrainError> {
        self.epoch += 1;
        let mut order = self.train_idx.clone();
        order.shuffle(&mut self.rng);
        let trainable = self.model.trainable_parameters();
        let mut loss_sum = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &self.data[i];
                let mut g = Graph::new();
                let probs = self.model.forward_graph(&mut g, &ex.seq)?;
                let p = PredictionTensor::new_unchecked(ex.seq.len(), self.model.slots(), g.value(probs).to_vec());
                if let Some(&value) = p.as_slice().iter().find(|v| !v.is_finite()) {
                    return Err(TrainError::NonFinite { epoch: self.epoch, example: i, value });
                }
                let (out, grad) = loss_and_gradient(&p, &ex.gold, &self.cfg.loss)?;
                if !out.loss.is_finite() {
                    return Err(TrainError::NonFinite { epoch: self.epoch, example: i, value: out.loss });
                }
                loss_sum += out.loss;
                let grad = grad.into_iter().map(|v| v * scale).collect();
                let node = g.external_loss(probs, out.loss * scale, grad);
                g.backward(node, self.model.params_mut())?;
            }
            self.adam.step(self.model.params_mut(), &trainable)?;
            check_finite(self.model.params())?;
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_idx = if self.val_idx.is_empty() { &self.train_idx } else { &self.val_idx };
        let val_set: Vec<&TrainExample> = val_idx.iter().map(|&i| &self.data[i]).collect();
        let val = evaluate(&self.model, &val_set, &self.cfg.loss)
            .map_err(|e| match e {
                TrainError::NonFinite { example, value, .. } => {
                    TrainError::NonFinite { epoch: self.epoch, example: val_idx[example], value }
                }
                other => other,
            })?
            .macro_f1();
        let improved = self.best.as_ref().is_none_or(|(_, best, _)| val > *best);
        if improved {
            self.best = Some((self.epoch, val, self.model.params().clone()));
        }
        let best_macro_f1 = self.best.as_ref().map_or(val, |(_, b, _)| *b);
        let metrics = EpochMetrics { epoch: self.epoch, train_loss, val_macro_f1: val, best_macro_f1, improved };
        self.history.push(metrics.clone());
        Ok(metrics)
    }

    /// Best checkpoint so far as a standalone model.
    pub fn best_model(&self) -> Tagger<E>
    where
        E: Clone,
    {
        let mut model = self.model.clone();
        if let Some((_, _, params)) = &self.best {
            *model.params_mut() = params.clone();
        }
        model
    }

    pub fn finish(mut self) -> TrainOutcome<E> {
        let best_epoch = match self.best.take() {
            Some((epoch, _, params)) => {
                *self.model.params_mut() = params;
                epoch
            }
            None => 0,
        };
        TrainOutcome { model: self.model, history: self.history, best_epoch }
    }
}

/// Trains for `cfg.max_epochs` epochs and returns the best checkpoint.
pub fn train<E: Encoder>(model: Tagger<E>, data: &[TrainExample], cfg: &TrainConfig) -> Result<TrainOutcome<E>, TrainError> {
    let mut trainer = Trainer::new(model, data, cfg.clone())?;
    for _ in 0..cfg.max_epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.finish())
}
