//! Layered run configuration: built-in defaults, then a TOML file, then
//! command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use slotie_core::data::{Language, SynthConfig, TemplateSpec};
use slotie_core::nn::{DecodeConfig, ModelConfig, TrainConfig};

use crate::io::{read_text, DataError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub language: Language,
    /// Defaults to the fixed template table.
    pub templates: Option<Vec<TemplateSpec>>,
    /// Defaults to the language's conjunctions.
    pub conjunctions: Option<Vec<String>>,
    pub dedup_sentences: bool,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection { language: Language::En, templates: None, conjunctions: None, dedup_sentences: false }
    }
}

impl SynthSection {
    pub fn to_config(&self) -> SynthConfig {
        let mut cfg = SynthConfig::for_language(self.language);
        if let Some(t) = &self.templates {
            cfg.templates = t.clone();
        }
        if let Some(c) = &self.conjunctions {
            cfg.conjunctions = c.clone();
        }
        cfg.dedup_sentences = self.dedup_sentences;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub batch_size: usize,
}

impl Default for ExtractSection {
    fn default() -> Self {
        ExtractSection { batch_size: 32 }
    }
}

/// Every tunable of every command. The top-level seed is copied into the
/// model and training seeds by [`RunConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthSection,
    pub decode: DecodeConfig,
    pub extract: ExtractSection,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Read(#[from] DataError),
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Defaults overlaid with the file, if any.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => Self::from_toml(&read_text(p)?).map_err(|msg| ConfigError::Parse { path: p.display().to_string(), msg }),
        }
    }

    /// Propagates the single seed to every component.
    pub fn resolve(mut self) -> Self {
        self.model.seed = self.seed;
        self.train.seed = self.seed;
        self
    }
}
