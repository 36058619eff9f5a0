//! Single-pass, order-agnostic triplet extraction.
//!
//! A tagger emits N parallel token masks per sentence, each labelling every
//! token as Background, Subject, Relation or Object. Training compares the
//! masks with the gold triplets through an optimal bipartite matching, so the
//! order in which gold triplets are listed never matters.
//!
//! This crate is `no_std` (it needs `alloc`) and holds everything that is pure
//! computation:
//!
//! - [`tokens`]: tokenization, masks, conversion to string extractions
//! - [`matching`]: smooth IoU, Hungarian assignment, set loss and its gradient
//! - [`nn`]: reverse-mode autodiff, the reference encoder, slot head, decoding,
//!   Adam and the training loop
//! - [`data`]: tuple-to-mask alignment, CoNLL role conversion, template-based
//!   sentence synthesis
//! - [`eval`]: token macro-F1 and the WiRe57, CaRB, CaRB 1-1 and OIE2016-style
//!   scorers

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod eval;
pub mod matching;
pub mod nn;
pub mod prediction;
pub mod tokens;

pub use matching::{Assignment, LossConfig, SimilarityMatrix};
pub use prediction::PredictionTensor;
pub use tokens::{Extraction, LabelGrid, TokenClass, TokenSequence, TripletMask, TripletSpans};
