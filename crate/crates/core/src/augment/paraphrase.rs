use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AugmentError;
use crate::inference::{Backend, BackendError, GenerationParams};
use crate::prompt::normalize_whitespace;

pub const DEFAULT_PARAPHRASE_INSTRUCTION: &str = "Rewrite the following clinical trial statement so that it keeps exactly the same meaning but uses different wording, and reply with the rewritten statement only.";

/// Label-preserving clinical truisms, one per line.
pub const DEFAULT_APPEND_POOL: &str = include_str!("../../data/append_pool.txt");

/// Builds paraphrase requests around a fixed instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paraphraser {
    pub instruction: String,
}

impl Default for Paraphraser {
    fn default() -> Self {
        Self {
            instruction: DEFAULT_PARAPHRASE_INSTRUCTION.to_string(),
        }
    }
}

impl Paraphraser {
    pub fn prompt(&self, statement: &str) -> String {
        format!("<s>[INST]{}\nStatement: {}[/INST]", self.instruction, statement.trim())
    }

    /// Requests a paraphrase; a degenerate output is retried once with the
    /// next seed before failing.
    pub fn paraphrase(
        &self,
        statement: &str,
        backend: &dyn Backend,
        params: &GenerationParams,
    ) -> Result<String, AugmentError> {
        self.paraphrase_with(statement, params, |prompt, params| backend.generate(prompt, params))
    }

    pub(crate) fn paraphrase_with(
        &self,
        statement: &str,
        params: &GenerationParams,
        generate: impl Fn(&str, &GenerationParams) -> Result<String, BackendError>,
    ) -> Result<String, AugmentError> {
        let prompt = self.prompt(statement);
        let mut params = params.clone();
        let mut last = String::new();
        for _ in 0..2 {
            let raw = generate(&prompt, &params)?;
            let cleaned = clean_paraphrase(&raw, &prompt, &self.instruction);
            if !is_degenerate(statement, &cleaned) {
                return Ok(cleaned);
            }
            last = cleaned;
            params.seed = params.seed.map(|s| s.wrapping_add(1));
        }
        Err(AugmentError::DegenerateParaphraseOutput {
            statement: statement.to_string(),
            output: last,
        })
    }
}

pub fn paraphrase_statement(
    text: &str,
    backend: &dyn Backend,
    params: &GenerationParams,
) -> Result<String, AugmentError> {
    Paraphraser::default().paraphrase(text, backend, params)
}

fn comparable(s: &str) -> String {
    normalize_whitespace(s)
        .trim_end_matches(['.', '!', '?'])
        .to_lowercase()
}

fn is_degenerate(input: &str, output: &str) -> bool {
    output.split_whitespace().count() < 3 || comparable(input) == comparable(output)
}

/// Strips prompt or instruction echoes, an answer label and wrapping quotes.
pub fn clean_paraphrase(raw: &str, prompt: &str, instruction: &str) -> String {
    let mut text = raw.trim();
    for echo in [prompt, instruction] {
        if let Some(rest) = text.strip_prefix(echo) {
            text = rest.trim_start();
        }
    }
    for label in ["Rewritten statement:", "Paraphrase:", "Statement:", "Answer:"] {
        if text.len() >= label.len() && text[..label.len()].eq_ignore_ascii_case(label) {
            text = text[label.len()..].trim_start();
        }
    }
    let text = text.trim();
    let unquoted = text
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(text);
    normalize_whitespace(unquoted)
}

/// Appends a pool sentence chosen by a seeded RNG.
pub fn append_text(text: &str, pool: &[String], seed: u64) -> Result<String, AugmentError> {
    if pool.is_empty() {
        return Err(AugmentError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = &pool[rng.random_range(0..pool.len())];
    Ok(format!("{text} {pick}"))
}

pub fn parse_append_pool(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn load_append_pool(path: impl AsRef<Path>) -> Result<Vec<String>, AugmentError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| AugmentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let pool = parse_append_pool(&text);
    if pool.is_empty() {
        return Err(AugmentError::EmptyPool);
    }
    Ok(pool)
}

pub(crate) fn default_append_pool() -> Vec<String> {
    parse_append_pool(DEFAULT_APPEND_POOL)
}
