//! Label-aware augmentation of training splits and fine-tune export.

mod export;
mod negation;
mod paraphrase;
mod recipe;
pub mod verbs;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::inference::BackendError;
use crate::prompt::PromptError;

pub use export::{export_finetune_dataset, records_to_jsonl, FinetuneRecord};
pub use negation::{negate_statement, Negation, NegationRule};
pub use paraphrase::{
    append_text, clean_paraphrase, load_append_pool, paraphrase_statement, Paraphraser, DEFAULT_APPEND_POOL,
    DEFAULT_PARAPHRASE_INSTRUCTION,
};
pub use recipe::{
    build_recipe, load_curated, AugmentReport, AugmentedSplit, CuratedEntry, Recipe, RecipeContext, SkippedDerivation,
};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("no negation site found in {0:?}")]
    NoNegationSite(String),
    #[error("paraphrase output was degenerate twice for {statement:?}: {output:?}")]
    DegenerateParaphraseOutput { statement: String, output: String },
    #[error("append pool is empty")]
    EmptyPool,
    #[error("curated paraphrase file not found: {0}")]
    MissingCuratedFile(PathBuf),
    #[error("curated entry refers to unknown base instance {0}")]
    CuratedUnknownBase(String),
    #[error("curated entry for {base_id} has label {label}, base is {base_label}")]
    CuratedLabelMismatch {
        base_id: String,
        label: String,
        base_label: String,
    },
    #[error("instance {0} has no gold label")]
    UnlabeledInstance(String),
    #[error("recipe needs a paraphrasing backend")]
    BackendRequired,
    #[error("invalid recipe: {0}")]
    BadRecipe(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{failed} of {total} paraphrase requests failed, above the {ceiling} failure ceiling")]
    FailureCeilingExceeded { failed: usize, total: usize, ceiling: f64 },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    Original,
    RuleNegated,
    ManualParaphrase,
    BackendParaphrase,
    TextAppend,
}

impl Origin {
    /// Whether instances of this origin carry the flipped base label.
    pub fn flips_label(self) -> bool {
        matches!(self, Origin::RuleNegated)
    }
}

/// Where an instance of an augmented split came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub origin: Origin,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    pub recipe: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_confidence: bool,
}

impl Provenance {
    pub fn original(recipe: &str) -> Self {
        Self {
            origin: Origin::Original,
            source_id: None,
            recipe: recipe.to_string(),
            low_confidence: false,
        }
    }

    pub fn derived(origin: Origin, source_id: &str, recipe: &str) -> Self {
        debug_assert!(origin != Origin::Original);
        Self {
            origin,
            source_id: Some(source_id.to_string()),
            recipe: recipe.to_string(),
            low_confidence: false,
        }
    }
}
