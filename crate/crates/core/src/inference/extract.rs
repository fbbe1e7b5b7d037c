use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::corpus::Label;

/// Word sets mapping generated tokens to labels. Matching is exact and
/// case-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLexicon {
    entail_tokens: Vec<String>,
    contra_tokens: Vec<String>,
    default: Label,
}

impl Default for LabelLexicon {
    fn default() -> Self {
        Self {
            entail_tokens: vec!["Yes".into(), "yes".into(), "entailment".into()],
            contra_tokens: vec!["No".into(), "no".into(), "contradiction".into()],
            default: Label::Entailment,
        }
    }
}

impl LabelLexicon {
    /// Fails when the sets overlap or either is empty.
    pub fn new(entail: Vec<String>, contra: Vec<String>, default: Label) -> Result<Self, String> {
        if entail.is_empty() || contra.is_empty() {
            return Err("label token sets must be nonempty".into());
        }
        if let Some(shared) = entail.iter().find(|t| contra.contains(t)) {
            return Err(format!("token {shared:?} is in both label sets"));
        }
        let dedup = |v: Vec<String>| {
            let mut out: Vec<String> = Vec::with_capacity(v.len());
            for t in v {
                if !out.contains(&t) {
                    out.push(t);
                }
            }
            out
        };
        Ok(Self {
            entail_tokens: dedup(entail),
            contra_tokens: dedup(contra),
            default,
        })
    }

    pub fn entail_tokens(&self) -> &[String] {
        &self.entail_tokens
    }

    pub fn contra_tokens(&self) -> &[String] {
        &self.contra_tokens
    }

    pub fn default_label(&self) -> Label {
        self.default
    }

    fn classify(&self, token: &str) -> Option<Label> {
        if self.entail_tokens.iter().any(|t| t == token) {
            Some(Label::Entailment)
        } else if self.contra_tokens.iter().any(|t| t == token) {
            Some(Label::Contradiction)
        } else {
            None
        }
    }

    /// Token a fine-tuning completion should carry for `label`.
    pub fn answer_word(label: Label) -> &'static str {
        match label {
            Label::Entailment => "Yes",
            Label::Contradiction => "No",
        }
    }
}

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// Whitespace tokens with leading/trailing punctuation removed.
pub fn label_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace().map(|t| t.trim_matches(is_punctuation))
}

/// Label of the first token found in either set, else the lexicon default.
pub fn extract_label(text: &str, lexicon: &LabelLexicon) -> Label {
    label_tokens(text)
        .find_map(|t| lexicon.classify(t))
        .unwrap_or(lexicon.default)
}
