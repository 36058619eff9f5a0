//! Model checkpoints as JSON with exact float round trips.

use std::path::Path;

use serde::{Deserialize, Serialize};
use slotie_core::nn::{EpochMetrics, Tagger};

use crate::config::RunConfig;
use crate::io::{read_text, write_json, DataError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    pub data_files: Vec<String>,
    pub best_epoch: usize,
    pub best_macro_f1: f64,
    /// Examples scored for checkpoint selection, as indices into the
    /// concatenated training files once over-length examples are dropped.
    pub selection_indices: Vec<usize>,
    pub history: Vec<EpochMetrics>,
    pub model: Tagger,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] DataError),
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let invalid = |msg: String| CheckpointError::Invalid { path: path.display().to_string(), msg };
        let text = read_text(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(invalid(format!("unsupported format version {}", ckpt.format_version)));
        }
        ckpt.model.check_shapes().map_err(|e| invalid(e.to_string()))?;
        Ok(ckpt)
    }
}
