//! Exhaustive grid search over prompt combinations, ranked by macro F1.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusStore, Split};
use crate::inference::{
    batch_predict, Backend, BatchOptions, GenerationCache, GenerationParams, InferenceError, LabelLexicon,
};
use crate::metrics::{confusion, to_f64};
use crate::prompt::{compose_with, enumerate_combos, ChatWrapper, PartLibrary, PromptCombo, PromptError};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no combination was evaluated successfully")]
    NoSuccessfulCombo,
    #[error("invalid search configuration: {0}")]
    BadConfig(String),
    #[error("ledger {path} line {line}: {reason}")]
    BadLedger { path: PathBuf, line: usize, reason: String },
    #[error("ledger {path} was written by a different configuration ({found}, expected {expected})")]
    LedgerMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error("instance {0} has no gold label")]
    UnlabeledInstance(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SearchError + '_ {
    move |source| SearchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Default)]
pub struct SearchConfig {
    pub params: GenerationParams,
    pub batch: BatchOptions,
    pub lexicon: LabelLexicon,
    pub wrapper: ChatWrapper,
    /// Fraction of the split scored for every combo, drawn once per run.
    pub subsample: Option<f64>,
    pub seed: u64,
    pub ledger: Option<PathBuf>,
    /// Skip combos already marked ok in the ledger.
    pub resume: bool,
    /// Stop after this many new evaluations.
    pub max_evaluations: Option<usize>,
    /// Written to every ledger line and checked on resume.
    pub config_hash: String,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if let Some(f) = self.subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(SearchError::BadConfig(format!("subsample must lie in (0, 1], got {f}")));
            }
        }
        if self.resume && self.ledger.is_none() {
            return Err(SearchError::BadConfig("resume needs a ledger path".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// One ledger line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub combo: PromptCombo,
    pub macro_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_f1_exact: Option<String>,
    pub status: Status,
    pub n: usize,
    #[serde(default)]
    pub cache_hits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seed: u64,
    pub config_hash: String,
}

impl LedgerEntry {
    fn score(&self) -> Option<Ratio<u64>> {
        self.macro_f1_exact.as_deref().and_then(|s| s.parse().ok())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankedCombo {
    pub combo: PromptCombo,
    #[serde(serialize_with = "ratio_as_f64")]
    pub macro_f1: Ratio<u64>,
    pub n: usize,
    pub cache_hits: usize,
}

fn ratio_as_f64<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(to_f64(*r))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailedCombo {
    pub combo: PromptCombo,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchResult {
    /// Successful combos, best first.
    pub ranked: Vec<RankedCombo>,
    pub failed: Vec<FailedCombo>,
    /// Combos not reached because of the evaluation budget.
    pub pending: Vec<PromptCombo>,
    /// Evaluations made by this run, excluding resumed ones.
    pub evaluated: usize,
    pub resumed: usize,
}

impl SearchResult {
    pub fn is_complete(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn to_json(&self, meta: Option<Value>) -> Value {
        let mut v = json!({
            "best": self.ranked.first().map(|r| r.combo),
            "ranked": self.ranked,
            "failed": self.failed,
            "pending": self.pending,
            "evaluated": self.evaluated,
            "resumed": self.resumed,
        });
        if let Some(meta) = meta {
            v["_meta"] = meta;
        }
        v
    }

    /// Leaderboard table; `top` limits the number of rows.
    pub fn to_markdown(&self, top: Option<usize>) -> String {
        let mut out = String::from("| Rank | Combo | Macro F1 | n |\n|---|---|---|---|\n");
        for (i, r) in self.ranked.iter().take(top.unwrap_or(usize::MAX)).enumerate() {
            out.push_str(&format!("| {} | {} | {:.4} | {} |\n", i + 1, r.combo, to_f64(r.macro_f1), r.n));
        }
        if !self.failed.is_empty() {
            out.push_str(&format!("\n{} combination(s) failed.\n", self.failed.len()));
        }
        out
    }
}

/// Orders by score, highest first, then by combo indices.
pub fn rank(entries: &mut [RankedCombo]) {
    entries.sort_by(|a, b| b.macro_f1.cmp(&a.macro_f1).then(a.combo.cmp(&b.combo)));
}

pub fn select_best(result: &SearchResult) -> Result<PromptCombo, SearchError> {
    result
        .ranked
        .iter()
        .min_by(|a, b| b.macro_f1.cmp(&a.macro_f1).then(a.combo.cmp(&b.combo)))
        .map(|r| r.combo)
        .ok_or(SearchError::NoSuccessfulCombo)
}

/// Seeded subsample keeping split order. Intervention links whose base was
/// dropped are removed.
pub fn subsample_split(split: &Split, fraction: f64, seed: u64) -> Result<Split, SearchError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SearchError::BadConfig(format!("subsample must lie in (0, 1], got {fraction}")));
    }
    let n = split.len();
    let k = ((fraction * n as f64).ceil() as usize).clamp(n.min(1), n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    let ids: HashSet<&str> = keep.iter().map(|&i| split.instances()[i].id.as_str()).collect();
    let instances = keep
        .iter()
        .map(|&i| {
            let mut inst = split.instances()[i].clone();
            if inst.intervention.as_ref().is_some_and(|m| !ids.contains(m.base_id.as_str())) {
                inst.intervention = None;
            }
            inst
        })
        .collect();
    Ok(Split::new(format!("{}_sub", split.name), instances)?)
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerEntry>, SearchError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => out.push(e),
            // A torn final line from an interrupted run.
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("ignoring torn last line of {}", path.display());
            }
            Err(e) => {
                return Err(SearchError::BadLedger {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

struct Ledger {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Ledger {
    fn open(path: &Path, append: bool) -> Result<Self, SearchError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        if append {
            let text = fs::read(path).unwrap_or_default();
            if !text.is_empty() && !text.ends_with(b"\n") {
                let mut f = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
                f.write_all(b"\n").map_err(io_err(path))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)
            .map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    fn append(&mut self, entry: &LedgerEntry) -> Result<(), SearchError> {
        let line = serde_json::to_string(entry).expect("ledger entry serializes");
        writeln!(self.out, "{line}").map_err(io_err(&self.path))?;
        self.out.flush().map_err(io_err(&self.path))
    }
}

/// Scores every combo of `library` on `split` and ranks the results.
///
/// Each combo's outcome is appended to the ledger as soon as it settles. A
/// combo whose generations fail beyond the ceiling is marked failed and left
/// out of the ranking.
pub fn grid_search(
    split: &Split,
    corpus: &CorpusStore,
    library: &PartLibrary,
    backend: &dyn Backend,
    cache: &GenerationCache,
    config: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    config.validate()?;
    let scored = match config.subsample {
        Some(f) if f < 1.0 => subsample_split(split, f, config.seed)?,
        _ => split.clone(),
    };
    let golds = scored
        .instances()
        .iter()
        .map(|i| i.gold.ok_or_else(|| SearchError::UnlabeledInstance(i.id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    scored.check_refs(corpus)?;

    let mut done: BTreeMap<PromptCombo, LedgerEntry> = BTreeMap::new();
    if config.resume {
        let path = config.ledger.as_deref().expect("validated");
        for entry in read_ledger(path)? {
            if entry.config_hash != config.config_hash || entry.seed != config.seed {
                return Err(SearchError::LedgerMismatch {
                    path: path.to_path_buf(),
                    found: format!("{} seed {}", entry.config_hash, entry.seed),
                    expected: format!("{} seed {}", config.config_hash, config.seed),
                });
            }
            if entry.status == Status::Ok {
                done.insert(entry.combo, entry);
            }
        }
    }
    let mut ledger = match &config.ledger {
        Some(p) => Some(Ledger::open(p, config.resume)?),
        None => None,
    };

    let combos = enumerate_combos(library);
    let resumed = combos.iter().filter(|c| done.contains_key(c)).count();
    let mut failed = Vec::new();
    let mut pending = Vec::new();
    let mut evaluated = 0;
    for combo in combos {
        if done.contains_key(&combo) {
            continue;
        }
        if config.max_evaluations.is_some_and(|m| evaluated >= m) {
            pending.push(combo);
            continue;
        }
        let skeleton = compose_with(combo, library, config.wrapper.clone())?;
        let entry = match batch_predict(
            &scored,
            &skeleton,
            corpus,
            backend,
            &config.params,
            &config.lexicon,
            cache,
            &config.batch,
        ) {
            Ok(outcome) => {
                let preds: Vec<_> = outcome.predictions.iter().map(|(_, l)| l).collect();
                let score = confusion(&preds, &golds).expect("aligned").macro_f1();
                LedgerEntry {
                    combo,
                    macro_f1: Some(to_f64(score)),
                    macro_f1_exact: Some(score.to_string()),
                    status: Status::Ok,
                    n: preds.len(),
                    cache_hits: outcome.cache_hits,
                    error: None,
                    seed: config.seed,
                    config_hash: config.config_hash.clone(),
                }
            }
            Err(e @ InferenceError::FailureCeilingExceeded { .. }) => {
                log::warn!("combo {combo} failed: {e}");
                failed.push(FailedCombo {
                    combo,
                    error: e.to_string(),
                });
                LedgerEntry {
                    combo,
                    macro_f1: None,
                    macro_f1_exact: None,
                    status: Status::Failed,
                    n: scored.len(),
                    cache_hits: 0,
                    error: Some(e.to_string()),
                    seed: config.seed,
                    config_hash: config.config_hash.clone(),
                }
            }
            Err(e) => return Err(e.into()),
        };
        evaluated += 1;
        if let Some(l) = ledger.as_mut() {
            l.append(&entry)?;
        }
        log::info!("{combo}: {:?}", entry.macro_f1);
        if entry.status == Status::Ok {
            done.insert(combo, entry);
        }
    }

    let mut ranked: Vec<RankedCombo> = done
        .into_values()
        .map(|e| RankedCombo {
            combo: e.combo,
            macro_f1: e.score().unwrap_or_else(|| Ratio::new(0, 1)),
            n: e.n,
            cache_hits: e.cache_hits,
        })
        .collect();
    rank(&mut ranked);
    Ok(SearchResult {
        ranked,
        failed,
        pending,
        evaluated,
        resumed,
    })
}
