//! Token encoders. [`ReferenceEncoder`] is a small post-norm Transformer
//! trained from scratch over a closed vocabulary.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::tensor::{ParamId, ParamStore, Tensor};
use super::NnError;
use crate::tokens::TokenSequence;

/// Anything that maps a token sequence to T×H hidden states on a tape.
pub trait Encoder {
    fn hidden_size(&self) -> usize;

    /// Longest accepted input, in tokens.
    fn max_len(&self) -> usize;

    /// Records the encoding of `seq` on `g`; the result has shape (T, H).
    fn encode(&self, g: &mut Graph, store: &ParamStore, seq: &TokenSequence) -> Result<Var, NnError>;

    /// Every parameter the encoder owns.
    fn parameters(&self) -> Vec<ParamId>;

    /// Parameters the optimizer may update.
    fn trainable_parameters(&self, store: &ParamStore) -> Vec<ParamId> {
        self.parameters().into_iter().filter(|&id| !store.is_frozen(id)).collect()
    }
}

/// Token to id map. Id 0 is the out-of-vocabulary bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = NnError;

    fn try_from(tokens: Vec<String>) -> Result<Self, NnError> {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

pub const OOV_TOKEN: &str = "<unk>";

impl Vocab {
    /// Ids are assigned in order of first appearance.
    pub fn build<'a>(sequences: impl IntoIterator<Item = &'a TokenSequence>) -> Self {
        let mut tokens = vec![OOV_TOKEN.to_string()];
        let mut index = BTreeMap::new();
        index.insert(OOV_TOKEN.to_string(), 0);
        for seq in sequences {
            for tok in seq.tokens() {
                if !index.contains_key(tok) {
                    index.insert(tok.clone(), tokens.len());
                    tokens.push(tok.clone());
                }
            }
        }
        Vocab { tokens, index }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, NnError> {
        if tokens.first().map(String::as_str) != Some(OOV_TOKEN) {
            return Err(NnError::Config(format!("vocabulary must start with {OOV_TOKEN}")));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub blocks: usize,
    pub ff_hidden: usize,
    pub max_len: usize,
    /// `None` trains everything. `Some(k)` freezes the embeddings and all but
    /// the top `k` blocks; `Some(0)` leaves only the slot head trainable.
    pub trainable_top_blocks: Option<usize>,
    pub layer_norm_eps: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden: 64,
            blocks: 2,
            ff_hidden: 128,
            max_len: 256,
            trainable_top_blocks: None,
            layer_norm_eps: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Block {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

impl Block {
    fn ids(&self) -> [ParamId; 16] {
        [
            self.wq, self.bq, self.wk, self.bk, self.wv, self.bv, self.wo, self.bo, self.ln1_g, self.ln1_b,
            self.w1, self.b1, self.w2, self.b2, self.ln2_g, self.ln2_b,
        ]
    }
}

/// Learned embeddings plus sinusoidal positions, followed by blocks of
/// single-head self-attention and a GELU feed-forward layer, each wrapped in
/// a residual connection and layer normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEncoder {
    config: EncoderConfig,
    vocab: Vocab,
    embedding: ParamId,
    blocks: Vec<Block>,
}

pub(crate) fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-a..a)).collect();
    Tensor::new(vec![fan_in, fan_out], data)
}

fn sinusoid(pos: usize, k: usize, hidden: usize) -> f64 {
    let pair = (k / 2) as f64;
    let angle = pos as f64 / libm::pow(10_000.0, 2.0 * pair / hidden as f64);
    if k % 2 == 0 {
        libm::sin(angle)
    } else {
        libm::cos(angle)
    }
}

impl ReferenceEncoder {
    /// Registers freshly initialised parameters in `store`.
    pub fn new(config: EncoderConfig, vocab: Vocab, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        if config.hidden == 0 || config.ff_hidden == 0 || config.max_len == 0 {
            return Err(NnError::Config("encoder dimensions must be positive".into()));
        }
        let h = config.hidden;
        let emb_data = (0..vocab.len() * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let embedding = store.add("encoder.embedding", Tensor::new(vec![vocab.len(), h], emb_data));
        let mut blocks = Vec::with_capacity(config.blocks);
        for b in 0..config.blocks {
            let mut add = |name: &str, t: Tensor| store.add(format!("encoder.block{b}.{name}"), t);
            let wq = add("wq", xavier(rng, h, h));
            let bq = add("bq", Tensor::zeros(vec![h]));
            let wk = add("wk", xavier(rng, h, h));
            let bk = add("bk", Tensor::zeros(vec![h]));
            let wv = add("wv", xavier(rng, h, h));
            let bv = add("bv", Tensor::zeros(vec![h]));
            let wo = add("wo", xavier(rng, h, h));
            let bo = add("bo", Tensor::zeros(vec![h]));
            let ln1_g = add("ln1.gamma", Tensor::new(vec![h], vec![1.0; h]));
            let ln1_b = add("ln1.beta", Tensor::zeros(vec![h]));
            let w1 = add("ff.w1", xavier(rng, h, config.ff_hidden));
            let b1 = add("ff.b1", Tensor::zeros(vec![config.ff_hidden]));
            let w2 = add("ff.w2", xavier(rng, config.ff_hidden, h));
            let b2 = add("ff.b2", Tensor::zeros(vec![h]));
            let ln2_g = add("ln2.gamma", Tensor::new(vec![h], vec![1.0; h]));
            let ln2_b = add("ln2.beta", Tensor::zeros(vec![h]));
            blocks.push(Block {
                wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b,
            });
        }
        let enc = ReferenceEncoder { config, vocab, embedding, blocks };
        enc.apply_freezing(store);
        Ok(enc)
    }

    fn apply_freezing(&self, store: &mut ParamStore) {
        let Some(top) = self.config.trainable_top_blocks else { return };
        store.set_frozen(self.embedding, true);
        let first_trainable = self.blocks.len().saturating_sub(top);
        for (i, block) in self.blocks.iter().enumerate() {
            for id in block.ids() {
                store.set_frozen(id, i < first_trainable);
            }
        }
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub(crate) fn embedding(&self) -> ParamId {
        self.embedding
    }

    fn token_ids(&self, seq: &TokenSequence) -> Vec<usize> {
        seq.tokens().iter().map(|t| self.vocab.id(t)).collect()
    }

    fn encode_inner(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        seq: &TokenSequence,
        mut attention: Option<&mut Vec<Var>>,
    ) -> Result<Var, NnError> {
        let t_len = seq.len();
        if t_len == 0 {
            return Err(NnError::EmptySequence);
        }
        if t_len > self.config.max_len {
            return Err(NnError::TooLong { len: t_len, max: self.config.max_len });
        }
        let h = self.config.hidden;
        let ids = self.token_ids(seq);
        let emb = g.gather(store, self.embedding, &ids);
        let mut pos = Vec::with_capacity(t_len * h);
        for t in 0..t_len {
            pos.extend((0..h).map(|k| sinusoid(t, k, h)));
        }
        let pos = g.leaf(t_len, h, pos);
        let mut x = g.add(emb, pos);
        let scale = 1.0 / libm::sqrt(h as f64);
        let eps = self.config.layer_norm_eps;
        for block in &self.blocks {
            let affine = |g: &mut Graph, input: Var, w: ParamId, b: ParamId| {
                let w = g.param(store, w);
                let b = g.param(store, b);
                let y = g.matmul(input, w);
                g.add_row(y, b)
            };
            let q = affine(g, x, block.wq, block.bq);
            let k = affine(g, x, block.wk, block.bk);
            let v = affine(g, x, block.wv, block.bv);
            let scores = g.matmul_t(q, k);
            let scores = g.scale(scores, scale);
            let attn = g.softmax_rows(scores);
            if let Some(list) = attention.as_deref_mut() {
                list.push(attn);
            }
            let ctx = g.matmul(attn, v);
            let out = affine(g, ctx, block.wo, block.bo);
            let res = g.add(x, out);
            let (g1, b1) = (g.param(store, block.ln1_g), g.param(store, block.ln1_b));
            let hmid = g.layer_norm(res, g1, b1, eps);
            let ff = affine(g, hmid, block.w1, block.b1);
            let ff = g.gelu(ff);
            let ff = affine(g, ff, block.w2, block.b2);
            let res = g.add(hmid, ff);
            let (g2, b2) = (g.param(store, block.ln2_g), g.param(store, block.ln2_b));
            x = g.layer_norm(res, g2, b2, eps);
        }
        Ok(x)
    }

    /// Attention probabilities of every block, each T×T row-major.
    pub fn attention_maps(&self, store: &ParamStore, seq: &TokenSequence) -> Result<Vec<Vec<f64>>, NnError> {
        let mut g = Graph::new();
        let mut maps = Vec::new();
        self.encode_inner(&mut g, store, seq, Some(&mut maps))?;
        Ok(maps.into_iter().map(|v| g.value(v).to_vec()).collect())
    }
}

impl Encoder for ReferenceEncoder {
    fn hidden_size(&self) -> usize {
        self.config.hidden
    }

    fn max_len(&self) -> usize {
        self.config.max_len
    }

    fn encode(&self, g: &mut Graph, store: &ParamStore, seq: &TokenSequence) -> Result<Var, NnError> {
        self.encode_inner(g, store, seq, None)
    }

    fn parameters(&self) -> Vec<ParamId> {
        let mut ids = vec![self.embedding];
        for b in &self.blocks {
            ids.extend(b.ids());
        }
        ids
    }
}
