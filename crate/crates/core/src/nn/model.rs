use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{xavier, Encoder, EncoderConfig, ReferenceEncoder, Vocab};
use super::graph::{Graph, Var};
use super::tensor::{ParamId, ParamStore, Tensor};
use super::NnError;
use crate::prediction::PredictionTensor;
use crate::tokens::{TokenSequence, NUM_CLASSES};

/// Default number of prediction slots.
pub const DEFAULT_SLOTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub slots: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { encoder: EncoderConfig::default(), slots: DEFAULT_SLOTS, seed: 0 }
    }
}

/// Per-token affine map from H to N·C channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionHead {
    slots: usize,
    weight: ParamId,
    bias: ParamId,
}

impl DetectionHead {
    pub fn new(hidden: usize, slots: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        if slots == 0 {
            return Err(NnError::Config("at least one prediction slot is required".into()));
        }
        let weight = store.add("head.weight", xavier(rng, hidden, slots * NUM_CLASSES));
        let bias = store.add("head.bias", Tensor::zeros(vec![slots * NUM_CLASSES]));
        Ok(DetectionHead { slots, weight, bias })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn parameters(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }

    /// Maps (T, H) states to (T·N, C) class probabilities.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, hidden: Var) -> Var {
        let (t_len, _) = g.shape(hidden);
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let logits = g.matmul(hidden, w);
        let logits = g.add_row(logits, b);
        let cells = g.reshape(logits, t_len * self.slots, NUM_CLASSES);
        g.softmax_rows(cells)
    }
}

/// Encoder plus slot head, owning all parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tagger<E = ReferenceEncoder> {
    encoder: E,
    head: DetectionHead,
    params: ParamStore,
}

impl Tagger<ReferenceEncoder> {
    /// Fresh model over `vocab`, initialised from `config.seed`.
    pub fn new(config: &ModelConfig, vocab: Vocab) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let encoder = ReferenceEncoder::new(config.encoder.clone(), vocab, &mut params, &mut rng)?;
        let head = DetectionHead::new(config.encoder.hidden, config.slots, &mut params, &mut rng)?;
        Ok(Tagger { encoder, head, params })
    }

    /// Restores a model from its parts, checking that the parameter table
    /// fits the configuration.
    pub fn from_parts(encoder: ReferenceEncoder, head: DetectionHead, params: ParamStore) -> Result<Self, NnError> {
        let tagger = Tagger { encoder, head, params };
        tagger.check_shapes()?;
        Ok(tagger)
    }

    pub fn check_shapes(&self) -> Result<(), NnError> {
        let ids: Vec<ParamId> = self.encoder.parameters().into_iter().chain(self.head.parameters()).collect();
        if ids.iter().any(|id| id.0 >= self.params.len()) {
            return Err(NnError::Config("parameter table does not cover the model".into()));
        }
        let w = self.params.get(self.head.weight);
        if w.shape != [self.encoder.hidden_size(), self.head.slots * NUM_CLASSES] {
            return Err(NnError::Config("head weight shape does not match the configuration".into()));
        }
        let emb = self.params.get(self.encoder.embedding());
        if emb.shape != [self.encoder.vocab().len(), self.encoder.hidden_size()] {
            return Err(NnError::Config("embedding shape does not match the vocabulary".into()));
        }
        Ok(())
    }
}

impl<E: Encoder> Tagger<E> {
    pub fn with_encoder(encoder: E, slots: usize, mut params: ParamStore, seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = DetectionHead::new(encoder.hidden_size(), slots, &mut params, &mut rng)?;
        Ok(Tagger { encoder, head, params })
    }

    pub fn encoder(&self) -> &E {
        &self.encoder
    }

    pub fn head(&self) -> &DetectionHead {
        &self.head
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn slots(&self) -> usize {
        self.head.slots
    }

    /// Scalar count of encoder parameters.
    pub fn encoder_parameter_count(&self) -> usize {
        self.encoder.parameters().iter().map(|&id| self.params.get(id).len()).sum()
    }

    /// Parameters the optimizer updates.
    pub fn trainable_parameters(&self) -> Vec<ParamId> {
        let mut ids = self.encoder.trainable_parameters(&self.params);
        ids.extend(self.head.parameters().into_iter().filter(|&id| !self.params.is_frozen(id)));
        ids
    }

    /// Records the forward pass on `g`, returning the (T·N, C) probabilities.
    pub fn forward_graph(&self, g: &mut Graph, seq: &TokenSequence) -> Result<Var, NnError> {
        let hidden = self.encoder.encode(g, &self.params, seq)?;
        Ok(self.head.forward(g, &self.params, hidden))
    }

    /// Class probabilities of shape (T, N, C).
    pub fn forward(&self, seq: &TokenSequence) -> Result<PredictionTensor, NnError> {
        let mut g = Graph::new();
        let probs = self.forward_graph(&mut g, seq)?;
        Ok(PredictionTensor::new_unchecked(seq.len(), self.head.slots, g.value(probs).to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens::tokenize;

    fn toy(slots: usize) -> (Tagger, TokenSequence) {
        let seq = tokenize("Obama was born in Hawaii", true).unwrap();
        let vocab = Vocab::build([&seq]);
        let cfg = ModelConfig { slots, ..ModelConfig::default() };
        (Tagger::new(&cfg, vocab).unwrap(), seq)
    }

    #[test]
    fn output_shape_and_normalisation() {
        let (m, _) = toy(20);
        let seq = tokenize("a b c d", false).unwrap();
        let p = m.forward(&seq).unwrap();
        assert_eq!((p.seq_len(), p.slots()), (4, 20));
        assert_eq!(p.as_slice().len(), 4 * 20 * 4);
        for t in 0..4 {
            for n in 0..20 {
                let s: f64 = p.cell(t, n).iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn forward_is_pure() {
        let (m, seq) = toy(5);
        assert_eq!(m.forward(&seq).unwrap(), m.forward(&seq).unwrap());
    }

    #[test]
    fn too_long_input_rejected() {
        let seq = tokenize("x y z", false).unwrap();
        let cfg = ModelConfig {
            encoder: EncoderConfig { max_len: 2, ..EncoderConfig::default() },
            ..ModelConfig::default()
        };
        let m = Tagger::new(&cfg, Vocab::build([&seq])).unwrap();
        assert!(matches!(m.forward(&seq), Err(NnError::TooLong { len: 3, max: 2 })));
    }

    #[test]
    fn slot_count_only_grows_the_head() {
        let (small, _) = toy(20);
        let (large, _) = toy(100);
        assert_eq!(small.encoder_parameter_count(), large.encoder_parameter_count());
        assert!(large.params().num_scalars() > small.params().num_scalars());
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let (m, seq) = toy(4);
        for map in m.encoder().attention_maps(m.params(), &seq).unwrap() {
            for row in map.chunks_exact(seq.len()) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let (a, _) = toy(3);
        let (b, _) = toy(3);
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn freezing_leaves_only_the_head() {
        let seq = tokenize("a b", false).unwrap();
        let cfg = ModelConfig {
            encoder: EncoderConfig { trainable_top_blocks: Some(0), ..EncoderConfig::default() },
            slots: 3,
            seed: 1,
        };
        let m = Tagger::new(&cfg, Vocab::build([&seq])).unwrap();
        assert_eq!(m.trainable_parameters(), m.head().parameters().to_vec());

        let cfg = ModelConfig {
            encoder: EncoderConfig { trainable_top_blocks: Some(1), ..EncoderConfig::default() },
            slots: 3,
            seed: 1,
        };
        let m = Tagger::new(&cfg, Vocab::build([&seq])).unwrap();
        // one block (16 tensors) plus the head
        assert_eq!(m.trainable_parameters().len(), 18);
    }
}
