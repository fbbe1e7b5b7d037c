//! Generation backends, label extraction and cached batch prediction.

mod backend;
mod batch;
mod cache;
mod extract;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::prompt::PromptError;

pub use backend::{
    Backend, BackendError, BackendKind, BackendSpec, HttpBackend, ScriptedBackend, WireFormat, FALLBACK_KEY,
};
pub use batch::{
    batch_predict, parse_predictions, BatchOptions, BatchOutcome, InstanceFailure, PredictionProvenance,
    PredictionSet,
};
pub(crate) use batch::generate_with_retries;
pub use cache::GenerationCache;
pub use extract::{extract_label, label_tokens, LabelLexicon};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{failed} of {total} generations failed, above the {ceiling} failure ceiling")]
    FailureCeilingExceeded {
        failed: usize,
        total: usize,
        ceiling: f64,
        failures: Vec<InstanceFailure>,
    },
    #[error("generation cache: {0}")]
    Cache(#[from] std::io::Error),
    #[error("invalid predictions: {0}")]
    BadPredictions(String),
    #[error("invalid generation parameters: {0}")]
    BadParams(String),
}

/// Sampling parameters forwarded verbatim to the backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationParams {
    #[serde(default = "GenerationParams::default_sample")]
    pub sample: bool,
    #[serde(default = "GenerationParams::default_top_k")]
    pub top_k: u32,
    #[serde(default = "GenerationParams::default_max_new_tokens")]
    pub max_new_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GenerationParams {
    fn default_sample() -> bool {
        true
    }
    fn default_top_k() -> u32 {
        5
    }
    fn default_max_new_tokens() -> u32 {
        30
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.top_k == 0 {
            return Err(InferenceError::BadParams("top_k must be positive".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(InferenceError::BadParams("max_new_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Hash of the canonical JSON form; used in cache keys.
    pub fn params_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("plain data").as_bytes())
    }
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            sample: Self::default_sample(),
            top_k: Self::default_top_k(),
            max_new_tokens: Self::default_max_new_tokens(),
            seed: None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes).as_slice())
}

/// Stable key for a rendered prompt (hex SHA-256 of its UTF-8 bytes).
pub fn prompt_hash(prompt: &str) -> String {
    sha256_hex(prompt.as_bytes())
}
