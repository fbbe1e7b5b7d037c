use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{extract_label, prompt_hash, Backend, BackendError, GenerationCache, GenerationParams, InferenceError, LabelLexicon};
use crate::corpus::{resolve_evidence, CorpusStore, Label, Split, META_KEY};
use crate::prompt::PromptSkeleton;

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub max_in_flight: usize,
    /// Retries after the first attempt, for transient errors only.
    pub retries: u32,
    pub backoff: Duration,
    /// Largest tolerated fraction of failed generations.
    pub failure_ceiling: f64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            retries: 2,
            backoff: Duration::from_millis(200),
            failure_ceiling: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub instance_id: String,
    pub attempts: u32,
    pub error: BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionProvenance {
    pub combo: Option<String>,
    pub params: GenerationParams,
    pub backend: String,
    /// `prompt_hash:params_hash` per instance, in split order.
    pub cache_keys: Vec<String>,
    pub failures: Vec<InstanceFailure>,
}

/// Predicted labels in split order, with run provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    predictions: Vec<(String, Label)>,
    pub provenance: Option<PredictionProvenance>,
}

impl PredictionSet {
    pub fn new(predictions: Vec<(String, Label)>) -> Self {
        Self {
            predictions,
            provenance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Label)> {
        self.predictions.iter().map(|(id, l)| (id.as_str(), *l))
    }

    pub fn get(&self, id: &str) -> Option<Label> {
        self.predictions.iter().find(|(i, _)| i == id).map(|(_, l)| *l)
    }

    /// `{"<instance id>": "Entailment" | "Contradiction"}` in split order.
    pub fn to_submission_json(&self) -> Value {
        let mut map = Map::new();
        for (id, label) in &self.predictions {
            map.insert(id.clone(), Value::String(label.as_str().into()));
        }
        Value::Object(map)
    }
}

/// Reads a submission file. Values may be a bare label or `{"Prediction": label}`.
pub fn parse_predictions(text: &str) -> Result<PredictionSet, InferenceError> {
    let bad = |m: String| InferenceError::BadPredictions(m);
    let value: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(bad("expected a JSON object keyed by instance id".into()));
    };
    let mut out = Vec::with_capacity(map.len());
    for (id, v) in map {
        if id == META_KEY {
            continue;
        }
        let raw = match &v {
            Value::String(s) => s.as_str(),
            Value::Object(o) => o
                .get("Prediction")
                .and_then(Value::as_str)
                .ok_or_else(|| bad(format!("{id}: missing \"Prediction\"")))?,
            _ => return Err(bad(format!("{id}: expected a label string"))),
        };
        let label = raw.parse::<Label>().map_err(|e| bad(format!("{id}: {e}")))?;
        out.push((id, label));
    }
    Ok(PredictionSet::new(out))
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub predictions: PredictionSet,
    pub backend_calls: usize,
    pub cache_hits: usize,
}

enum Slot {
    Hit(String),
    Generated(String),
    Failed(InstanceFailure),
    CacheWrite(std::io::Error),
}

pub(crate) fn generate_with_retries(
    backend: &dyn Backend,
    prompt: &str,
    params: &GenerationParams,
    opts: &BatchOptions,
    calls: &AtomicUsize,
) -> Result<String, (u32, BackendError)> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        calls.fetch_add(1, Ordering::Relaxed);
        match backend.generate(prompt, params) {
            Ok(text) => return Ok(text),
            Err(e) if e.is_retryable() && attempt <= opts.retries => {
                let delay = opts.backoff.saturating_mul(1 << (attempt - 1).min(16));
                log::debug!("retrying after {e} (attempt {attempt}), sleeping {delay:?}");
                thread::sleep(delay);
            }
            Err(e) => return Err((attempt, e)),
        }
    }
}

/// Predicts a label for every instance of `split`. Failed generations fall
/// back to the lexicon default and are listed in the provenance; the run
/// aborts only when failures exceed `opts.failure_ceiling`.
#[allow(clippy::too_many_arguments)]
pub fn batch_predict(
    split: &Split,
    skeleton: &PromptSkeleton,
    corpus: &CorpusStore,
    backend: &dyn Backend,
    params: &GenerationParams,
    lexicon: &LabelLexicon,
    cache: &GenerationCache,
    opts: &BatchOptions,
) -> Result<BatchOutcome, InferenceError> {
    params.validate()?;
    let params_hash = params.params_hash();
    let mut prompts = Vec::with_capacity(split.len());
    for inst in split.instances() {
        let evidence = resolve_evidence(inst, corpus)?;
        let prompt = skeleton.render(&evidence, &inst.statement)?;
        let hash = prompt_hash(&prompt);
        prompts.push((prompt, hash));
    }

    let calls = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let workers = opts.max_in_flight.max(1).min(prompts.len().max(1));
    let (tx, rx) = mpsc::channel();
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (prompts, next, calls, params_hash) = (&prompts, &next, &calls, &params_hash);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((prompt, hash)) = prompts.get(i) else { break };
                let slot = match cache.get(hash, params_hash) {
                    Some(text) => Slot::Hit(text),
                    None => match generate_with_retries(backend, prompt, params, opts, calls) {
                        Ok(text) => match cache.insert(hash, params_hash, &text) {
                            Ok(()) => Slot::Generated(text),
                            Err(e) => Slot::CacheWrite(e),
                        },
                        Err((attempts, error)) => Slot::Failed(InstanceFailure {
                            instance_id: split.instances()[i].id.clone(),
                            attempts,
                            error,
                        }),
                    },
                };
                if tx.send((i, slot)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);

    let mut slots: Vec<Option<Slot>> = (0..prompts.len()).map(|_| None).collect();
    for (i, slot) in rx {
        slots[i] = Some(slot);
    }

    let mut predictions = Vec::with_capacity(prompts.len());
    let mut failures = Vec::new();
    let mut cache_hits = 0;
    for (inst, slot) in split.instances().iter().zip(slots) {
        let label = match slot.expect("every index is processed") {
            Slot::Hit(text) => {
                cache_hits += 1;
                extract_label(&text, lexicon)
            }
            Slot::Generated(text) => extract_label(&text, lexicon),
            Slot::CacheWrite(e) => return Err(e.into()),
            Slot::Failed(f) => {
                log::warn!("generation failed for {} after {} attempts: {}", f.instance_id, f.attempts, f.error);
                failures.push(f);
                lexicon.default_label()
            }
        };
        predictions.push((inst.id.clone(), label));
    }

    let total = predictions.len();
    if total > 0 && failures.len() as f64 > opts.failure_ceiling * total as f64 {
        return Err(InferenceError::FailureCeilingExceeded {
            failed: failures.len(),
            total,
            ceiling: opts.failure_ceiling,
            failures,
        });
    }

    let provenance = PredictionProvenance {
        combo: skeleton.combo().map(|c| c.to_string()),
        params: params.clone(),
        backend: backend.descriptor(),
        cache_keys: prompts.iter().map(|(_, h)| format!("{h}:{params_hash}")).collect(),
        failures,
    };
    Ok(BatchOutcome {
        predictions: PredictionSet {
            predictions,
            provenance: Some(provenance),
        },
        backend_calls: calls.into_inner(),
        cache_hits,
    })
}
