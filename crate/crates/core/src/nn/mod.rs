//! The tagger: a small autodiff engine, the reference encoder, the N-slot
//! head, decoding and training.

use alloc::string::String;

use thiserror::Error;

pub mod decode;
pub mod encoder;
pub mod graph;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use decode::{confidence, decode, decode_with, ConfidenceAggregator, DecodeConfig};
pub use encoder::{Encoder, EncoderConfig, ReferenceEncoder, Vocab};
pub use graph::{Graph, Var};
pub use model::{DetectionHead, ModelConfig, Tagger, DEFAULT_SLOTS};
pub use optim::{Adam, AdamConfig};
pub use tensor::{ParamId, ParamStore, Tensor};
pub use train::{train, EpochMetrics, TrainConfig, TrainError, TrainExample, Trainer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("graph error: {0}")]
    Graph(&'static str),
    #[error("input of {len} tokens exceeds the maximum of {max}")]
    TooLong { len: usize, max: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("non-finite gradient in parameter {param} at index {index}")]
    Numerical { param: usize, index: usize },
    #[error("invalid model configuration: {0}")]
    Config(String),
}
