//! Prompt-part variant library, template composition and rendering.
//!
//! A prompt is assembled from four sample-independent parts (task, CTR,
//! statement and option descriptions), each chosen from a list of variants,
//! plus three sample-dependent slots filled at render time.

mod combo;

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EvidenceBundle;

pub use combo::{enumerate_combos, PromptCombo};

pub const PRIMARY_SLOT: &str = "{{primary_evidence}}";
pub const SECONDARY_SLOT: &str = "{{secondary_evidence}}";
pub const STATEMENT_SLOT: &str = "{{statement}}";
const SLOTS: [&str; 3] = [PRIMARY_SLOT, SECONDARY_SLOT, STATEMENT_SLOT];

const SECONDARY_BLOCK: &str = "\n\nSecondary Trial:\n{{secondary_evidence}}";

const DEFAULT_LIBRARY: &str = include_str!("../../data/default_parts.json");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{kind} index {index} out of range (library has {available} variants)")]
    IndexOutOfRange {
        kind: PartKind,
        index: usize,
        available: usize,
    },
    #[error("unresolved slot {0} in rendered prompt")]
    UnresolvedSlot(&'static str),
    #[error("invalid combo string {0:?}, expected e.g. \"t4.c1.s5.o4\"")]
    BadCombo(String),
    #[error("invalid part library: {0}")]
    BadLibrary(String),
    #[error("skeleton must contain each slot exactly once: {0}")]
    BadSkeleton(&'static str),
    #[error("statement is empty")]
    EmptyStatement,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartKind {
    TaskDescription,
    CtrDescription,
    StatementDescription,
    OptionDescription,
}

impl PartKind {
    pub const ALL: [PartKind; 4] = [
        PartKind::TaskDescription,
        PartKind::CtrDescription,
        PartKind::StatementDescription,
        PartKind::OptionDescription,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartKind::TaskDescription => "TaskDescription",
            PartKind::CtrDescription => "CtrDescription",
            PartKind::StatementDescription => "StatementDescription",
            PartKind::OptionDescription => "OptionDescription",
        })
    }
}

/// Collapses internal whitespace runs to single spaces and trims the ends.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Serialize, Deserialize)]
struct LibraryFile {
    task_description: Vec<String>,
    ctr_description: Vec<String>,
    statement_description: Vec<String>,
    option_description: Vec<String>,
}

/// Variant texts for each part, stored whitespace-normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartLibrary {
    variants: [Vec<String>; 4],
}

impl PartLibrary {
    pub fn new(
        task: Vec<String>,
        ctr: Vec<String>,
        statement: Vec<String>,
        option: Vec<String>,
    ) -> Result<Self, PromptError> {
        let mut variants = [task, ctr, statement, option];
        for (kind, list) in PartKind::ALL.iter().zip(variants.iter_mut()) {
            if list.is_empty() {
                return Err(PromptError::BadLibrary(format!("{kind} has no variants")));
            }
            for (i, text) in list.iter_mut().enumerate() {
                *text = normalize_whitespace(text);
                if text.is_empty() {
                    return Err(PromptError::BadLibrary(format!("{kind} variant {} is empty", i + 1)));
                }
                if SLOTS.iter().any(|slot| text.contains(slot)) {
                    return Err(PromptError::BadLibrary(format!(
                        "{kind} variant {} contains a slot placeholder",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { variants })
    }

    /// The bundled five-variants-per-part library.
    pub fn default_library() -> Self {
        Self::from_json(DEFAULT_LIBRARY).expect("bundled library is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, PromptError> {
        let file: LibraryFile =
            serde_json::from_str(text).map_err(|e| PromptError::BadLibrary(e.to_string()))?;
        Self::new(
            file.task_description,
            file.ctr_description,
            file.statement_description,
            file.option_description,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_string(&self) -> String {
        let [t, c, s, o] = self.variants.clone();
        serde_json::to_string_pretty(&LibraryFile {
            task_description: t,
            ctr_description: c,
            statement_description: s,
            option_description: o,
        })
        .expect("plain data")
    }

    pub fn variants(&self, kind: PartKind) -> &[String] {
        &self.variants[kind.index()]
    }

    /// 1-based lookup.
    pub fn variant(&self, kind: PartKind, index: usize) -> Option<&str> {
        index
            .checked_sub(1)
            .and_then(|i| self.variants(kind).get(i))
            .map(String::as_str)
    }

    pub fn combo_count(&self) -> usize {
        self.variants.iter().map(Vec::len).product()
    }
}

/// Instruction-model framing around the prompt body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatWrapper {
    pub prefix: String,
    pub suffix: String,
    pub answer_cue: String,
}

impl Default for ChatWrapper {
    fn default() -> Self {
        Self {
            prefix: "<s>[INST]".into(),
            suffix: "[/INST]".into(),
            answer_cue: " Answer:".into(),
        }
    }
}

impl ChatWrapper {
    pub fn wrap(&self, body: &str) -> String {
        format!("{}{}{}{}", self.prefix, body, self.suffix, self.answer_cue)
    }
}

/// Instruction text with unresolved evidence and statement slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSkeleton {
    text: String,
    combo: Option<PromptCombo>,
    wrapper: ChatWrapper,
}

impl PromptSkeleton {
    /// Wraps a hand-written skeleton; each slot must appear exactly once.
    pub fn from_text(text: impl Into<String>, wrapper: ChatWrapper) -> Result<Self, PromptError> {
        let text = text.into();
        for slot in SLOTS {
            if text.matches(slot).count() != 1 {
                return Err(PromptError::BadSkeleton(slot));
            }
        }
        Ok(Self {
            text,
            combo: None,
            wrapper,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn combo(&self) -> Option<PromptCombo> {
        self.combo
    }

    pub fn wrapper(&self) -> &ChatWrapper {
        &self.wrapper
    }

    pub fn with_wrapper(mut self, wrapper: ChatWrapper) -> Self {
        self.wrapper = wrapper;
        self
    }

    /// Fills the slots and applies the chat wrapper. Single-CTR evidence drops
    /// the secondary trial block entirely.
    pub fn render(&self, evidence: &EvidenceBundle, statement: &str) -> Result<String, PromptError> {
        if statement.trim().is_empty() {
            return Err(PromptError::EmptyStatement);
        }
        let template = match evidence.secondary {
            Some(_) => self.text.clone(),
            None => self.text.replacen(SECONDARY_BLOCK, "", 1).replacen(SECONDARY_SLOT, "", 1),
        };
        let body = substitute(&template, |slot| match slot {
            PRIMARY_SLOT => evidence.primary.as_str(),
            SECONDARY_SLOT => evidence.secondary.as_deref().unwrap_or(""),
            _ => statement,
        });
        let rendered = self.wrapper.wrap(&body);
        if let Some(slot) = SLOTS.into_iter().find(|s| rendered.contains(s)) {
            return Err(PromptError::UnresolvedSlot(slot));
        }
        Ok(rendered)
    }
}

/// Single left-to-right pass, so substituted text is never rescanned.
fn substitute<'a>(template: &str, value: impl Fn(&'static str) -> &'a str) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some((pos, slot)) = SLOTS
        .iter()
        .filter_map(|s| rest.find(s).map(|p| (p, *s)))
        .min_by_key(|(p, _)| *p)
    {
        out.push_str(&rest[..pos]);
        out.push_str(value(slot));
        rest = &rest[pos + slot.len()..];
    }
    out.push_str(rest);
    out
}

/// Assembles the instruction text for `combo`.
pub fn compose(combo: PromptCombo, library: &PartLibrary) -> Result<PromptSkeleton, PromptError> {
    compose_with(combo, library, ChatWrapper::default())
}

pub fn compose_with(
    combo: PromptCombo,
    library: &PartLibrary,
    wrapper: ChatWrapper,
) -> Result<PromptSkeleton, PromptError> {
    combo.validate(library)?;
    let part = |kind| library.variant(kind, combo.index(kind)).expect("validated");
    let text = format!(
        "{task}\n{ctr}\n\nPrimary Trial:\n{PRIMARY_SLOT}{SECONDARY_BLOCK}\n\n{statement}\n{STATEMENT_SLOT}\n\n{option}",
        task = part(PartKind::TaskDescription),
        ctr = part(PartKind::CtrDescription),
        statement = part(PartKind::StatementDescription),
        option = part(PartKind::OptionDescription),
    );
    Ok(PromptSkeleton {
        text,
        combo: Some(combo),
        wrapper,
    })
}
