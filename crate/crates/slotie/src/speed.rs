//! Inference throughput in sentences per second.

use std::time::Instant;

use serde::Serialize;
use slotie_core::nn::{decode_with, DecodeConfig, Encoder, Tagger};
use slotie_core::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Throughput {
    pub sentences: usize,
    pub batch_size: usize,
    /// Median wall time of one pass over all sentences.
    pub seconds: f64,
    pub sentences_per_second: f64,
}

/// Runs forward pass plus decoding over `seqs` in batches of `batch_size`,
/// `warmup` untimed passes then `repeats` timed ones; reports the median.
pub fn measure_throughput<E: Encoder>(
    model: &Tagger<E>,
    seqs: &[TokenSequence],
    batch_size: usize,
    warmup: usize,
    repeats: usize,
) -> Throughput {
    let batch_size = batch_size.max(1);
    let cfg = DecodeConfig::default();
    let pass = || {
        let mut produced = 0usize;
        for batch in seqs.chunks(batch_size) {
            for seq in batch {
                if let Ok(p) = model.forward(seq) {
                    produced += decode_with(&p, seq, &cfg).len();
                }
            }
        }
        std::hint::black_box(produced);
    };
    for _ in 0..warmup {
        pass();
    }
    let mut times: Vec<f64> = (0..repeats.max(1))
        .map(|_| {
            let t = Instant::now();
            pass();
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let seconds = times[times.len() / 2];
    let sentences_per_second = if seconds > 0.0 { seqs.len() as f64 / seconds } else { f64::INFINITY };
    Throughput { sentences: seqs.len(), batch_size, seconds, sentences_per_second }
}
