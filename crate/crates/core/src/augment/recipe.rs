use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::paraphrase::default_append_pool;
use super::{append_text, negate_statement, AugmentError, Origin, Paraphraser, Provenance};
use crate::corpus::{Instance, InterventionKind, InterventionMeta, Label, Split};
use crate::inference::{generate_with_retries, Backend, BatchOptions, GenerationParams};

/// One hand-written addition tied to a base instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedEntry {
    pub base_id: String,
    pub statement: String,
    pub label: Label,
}

pub fn load_curated(path: impl AsRef<Path>) -> Result<Vec<CuratedEntry>, AugmentError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(AugmentError::MissingCuratedFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| AugmentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| AugmentError::BadRecipe(format!("{}: {e}", path.display())))
}

fn default_synthetic() -> usize {
    1376
}

fn default_paraphrases() -> u32 {
    5
}

/// How an augmented training split is built from an input split.
///
/// * `Manual`: every entailment original is negated and the curated file is merged.
/// * `ManualSynthetic`: `Manual` plus `synthetic` extra instances, half rule
///   negations of contradiction originals and half backend paraphrases.
/// * `FullSynthetic`: every entailment original is negated and every original
///   is paraphrased `paraphrases` times. Paraphrases are never negated.
/// * `Custom`: seeded fractions of originals are negated or get appended text,
///   and every original is paraphrased `paraphrase_multiplier` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Recipe {
    Manual {
        curated: PathBuf,
    },
    ManualSynthetic {
        curated: PathBuf,
        #[serde(default = "default_synthetic")]
        synthetic: usize,
    },
    FullSynthetic {
        #[serde(default = "default_paraphrases")]
        paraphrases: u32,
    },
    Custom {
        #[serde(default)]
        negate_fraction: f64,
        #[serde(default)]
        paraphrase_multiplier: u32,
        #[serde(default)]
        append_fraction: f64,
    },
}

impl Recipe {
    pub fn full_synthetic() -> Self {
        Recipe::FullSynthetic {
            paraphrases: default_paraphrases(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Recipe::Manual { .. } => "manual",
            Recipe::ManualSynthetic { .. } => "manual_synthetic",
            Recipe::FullSynthetic { .. } => "full_synthetic",
            Recipe::Custom { .. } => "custom",
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if let Recipe::Custom {
            negate_fraction,
            append_fraction,
            ..
        } = self
        {
            for (name, f) in [("negate_fraction", negate_fraction), ("append_fraction", append_fraction)] {
                if !(0.0..=1.0).contains(f) {
                    return Err(AugmentError::BadRecipe(format!("{name} must lie in [0, 1], got {f}")));
                }
            }
        }
        Ok(())
    }

    fn needs_backend(&self) -> bool {
        match self {
            Recipe::Manual { .. } => false,
            Recipe::ManualSynthetic { synthetic, .. } => *synthetic > 1,
            Recipe::FullSynthetic { paraphrases } => *paraphrases > 0,
            Recipe::Custom {
                paraphrase_multiplier, ..
            } => *paraphrase_multiplier > 0,
        }
    }
}

/// Run-level settings shared by every recipe.
pub struct RecipeContext<'a> {
    pub backend: Option<&'a dyn Backend>,
    pub params: GenerationParams,
    pub seed: u64,
    pub batch: BatchOptions,
    pub append_pool: Vec<String>,
    pub paraphraser: Paraphraser,
}

impl<'a> RecipeContext<'a> {
    pub fn new(seed: u64) -> Self {
        Self {
            backend: None,
            params: GenerationParams::default(),
            seed,
            batch: BatchOptions::default(),
            append_pool: default_append_pool(),
            paraphraser: Paraphraser::default(),
        }
    }

    pub fn with_backend(mut self, backend: &'a dyn Backend) -> Self {
        self.backend = Some(backend);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDerivation {
    pub base_id: String,
    pub origin: Origin,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub recipe: String,
    pub seed: u64,
    pub n_input: usize,
    pub n_output: usize,
    pub counts: BTreeMap<Origin, usize>,
    pub low_confidence: usize,
    pub backend_calls: usize,
    pub skipped: Vec<SkippedDerivation>,
}

/// A split plus one provenance record per instance, in the same order.
#[derive(Debug, Clone)]
pub struct AugmentedSplit {
    pub split: Split,
    pub provenance: Vec<Provenance>,
    pub report: AugmentReport,
}

impl AugmentedSplit {
    pub fn provenance_of(&self, id: &str) -> Option<&Provenance> {
        let i = self.split.instances().iter().position(|inst| inst.id == id)?;
        self.provenance.get(i)
    }

    /// Checks that every derived instance links to an original of the split
    /// and carries a gold label consistent with its origin.
    pub fn check_bookkeeping(&self) -> Result<(), String> {
        if self.provenance.len() != self.split.len() {
            return Err("provenance and split lengths differ".into());
        }
        for (inst, prov) in self.split.instances().iter().zip(&self.provenance) {
            let Some(source) = &prov.source_id else {
                if prov.origin != Origin::Original {
                    return Err(format!("{}: derived instance without source", inst.id));
                }
                continue;
            };
            let base = self
                .split
                .get(source)
                .ok_or_else(|| format!("{}: unknown source {source}", inst.id))?;
            if self.provenance_of(source).map(|p| p.origin) != Some(Origin::Original) {
                return Err(format!("{}: source {source} is not an original", inst.id));
            }
            let meta = inst
                .intervention
                .as_ref()
                .ok_or_else(|| format!("{}: missing intervention link", inst.id))?;
            if meta.base_id != *source || meta.kind != intervention_kind(prov.origin) {
                return Err(format!("{}: intervention link disagrees with provenance", inst.id));
            }
            let expected = base.gold.map(|g| if prov.origin.flips_label() { g.flip() } else { g });
            if inst.gold != expected {
                return Err(format!("{}: gold {:?}, expected {expected:?}", inst.id, inst.gold));
            }
        }
        Ok(())
    }

    /// Provenance keyed by instance id, in split order.
    pub fn provenance_json(&self) -> Value {
        let map = self
            .split
            .instances()
            .iter()
            .zip(&self.provenance)
            .map(|(inst, p)| (inst.id.clone(), serde_json::to_value(p).expect("provenance serializes")))
            .collect();
        Value::Object(map)
    }
}

fn intervention_kind(origin: Origin) -> InterventionKind {
    match origin {
        Origin::RuleNegated => InterventionKind::Contradiction,
        Origin::TextAppend => InterventionKind::TextAppend,
        _ => InterventionKind::Paraphrase,
    }
}

enum Job {
    Curated(String),
    Negated { text: String, low_confidence: bool },
    Paraphrase { seed: u64 },
    Append(String),
}

impl Job {
    fn origin(&self) -> Origin {
        match self {
            Job::Curated(_) => Origin::ManualParaphrase,
            Job::Negated { .. } => Origin::RuleNegated,
            Job::Paraphrase { .. } => Origin::BackendParaphrase,
            Job::Append(_) => Origin::TextAppend,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Job::Curated(_) => 0,
            Job::Negated { .. } => 1,
            Job::Paraphrase { .. } => 2,
            Job::Append(_) => 3,
        }
    }

    fn id_suffix(&self) -> &'static str {
        match self {
            Job::Curated(_) => "cur",
            Job::Negated { .. } => "neg",
            Job::Paraphrase { .. } => "para",
            Job::Append(_) => "app",
        }
    }
}

struct Planner<'s> {
    split: &'s Split,
    originals: Vec<usize>,
    jobs: Vec<(usize, Job)>,
    negated: HashSet<usize>,
    skipped: Vec<SkippedDerivation>,
    rng: ChaCha8Rng,
}

impl<'s> Planner<'s> {
    fn inst(&self, i: usize) -> &'s Instance {
        &self.split.instances()[i]
    }

    fn gold(&self, i: usize) -> Result<Label, AugmentError> {
        let inst = self.inst(i);
        inst.gold.ok_or_else(|| AugmentError::UnlabeledInstance(inst.id.clone()))
    }

    fn with_label(&self, label: Label) -> Result<Vec<usize>, AugmentError> {
        let mut out = Vec::new();
        for &i in &self.originals {
            if self.gold(i)? == label {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Negates candidates in order until `quota` succeed; unnegatable
    /// statements are recorded as skipped.
    fn negate(&mut self, candidates: &[usize], quota: usize) -> Result<usize, AugmentError> {
        let mut done = 0;
        for &i in candidates {
            if done == quota {
                break;
            }
            self.gold(i)?;
            if !self.negated.insert(i) {
                continue;
            }
            match negate_statement(&self.inst(i).statement) {
                Ok(n) => {
                    self.jobs.push((
                        i,
                        Job::Negated {
                            text: n.text,
                            low_confidence: n.low_confidence,
                        },
                    ));
                    done += 1;
                }
                Err(e) => self.skipped.push(SkippedDerivation {
                    base_id: self.inst(i).id.clone(),
                    origin: Origin::RuleNegated,
                    reason: e.to_string(),
                }),
            }
        }
        Ok(done)
    }

    fn paraphrase(&mut self, i: usize) -> Result<(), AugmentError> {
        self.gold(i)?;
        let seed = self.rng.random();
        self.jobs.push((i, Job::Paraphrase { seed }));
        Ok(())
    }

    fn curated(&mut self, entries: Vec<CuratedEntry>) -> Result<(), AugmentError> {
        let index = self.split.index_by_id();
        for entry in entries {
            let i = *index
                .get(entry.base_id.as_str())
                .filter(|i| self.originals.contains(i))
                .ok_or_else(|| AugmentError::CuratedUnknownBase(entry.base_id.clone()))?;
            let base_label = self.gold(i)?;
            if entry.label != base_label {
                return Err(AugmentError::CuratedLabelMismatch {
                    base_id: entry.base_id,
                    label: entry.label.to_string(),
                    base_label: base_label.to_string(),
                });
            }
            self.jobs.push((i, Job::Curated(entry.statement)));
        }
        Ok(())
    }

    fn shuffled_originals(&mut self) -> Vec<usize> {
        let mut v = self.originals.clone();
        v.shuffle(&mut self.rng);
        v
    }
}

fn fraction_of(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).floor() as usize).min(n)
}

/// Builds the augmented split described by `recipe`.
///
/// Derived instances only ever point at originals of the input split.
/// Statements without a negation site and failed paraphrases are skipped and
/// listed in the report; too many failed paraphrases abort the run.
pub fn build_recipe(split: &Split, recipe: &Recipe, ctx: &RecipeContext) -> Result<AugmentedSplit, AugmentError> {
    recipe.validate()?;
    if recipe.needs_backend() && ctx.backend.is_none() {
        return Err(AugmentError::BackendRequired);
    }
    let originals: Vec<usize> = (0..split.len()).filter(|&i| split.instances()[i].is_base()).collect();
    let mut plan = Planner {
        split,
        originals,
        jobs: Vec::new(),
        negated: HashSet::new(),
        skipped: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(ctx.seed),
    };

    match recipe {
        Recipe::Manual { curated } | Recipe::ManualSynthetic { curated, .. } => {
            let entries = load_curated(curated)?;
            plan.curated(entries)?;
            let entail = plan.with_label(Label::Entailment)?;
            plan.negate(&entail, usize::MAX)?;
            if let Recipe::ManualSynthetic { synthetic, .. } = recipe {
                let mut contra = plan.with_label(Label::Contradiction)?;
                contra.shuffle(&mut plan.rng);
                plan.negate(&contra, synthetic / 2)?;
                let order = plan.shuffled_originals();
                for &i in order.iter().cycle().take(if order.is_empty() { 0 } else { synthetic - synthetic / 2 }) {
                    plan.paraphrase(i)?;
                }
            }
        }
        Recipe::FullSynthetic { paraphrases } => {
            let entail = plan.with_label(Label::Entailment)?;
            plan.negate(&entail, usize::MAX)?;
            for i in plan.originals.clone() {
                for _ in 0..*paraphrases {
                    plan.paraphrase(i)?;
                }
            }
        }
        Recipe::Custom {
            negate_fraction,
            paraphrase_multiplier,
            append_fraction,
        } => {
            let n = plan.originals.len();
            let order = plan.shuffled_originals();
            plan.negate(&order, fraction_of(*negate_fraction, n))?;
            for i in plan.originals.clone() {
                for _ in 0..*paraphrase_multiplier {
                    plan.paraphrase(i)?;
                }
            }
            let order = plan.shuffled_originals();
            if fraction_of(*append_fraction, n) > 0 && ctx.append_pool.is_empty() {
                return Err(AugmentError::EmptyPool);
            }
            for &i in order.iter().take(fraction_of(*append_fraction, n)) {
                plan.gold(i)?;
                let text = append_text(&plan.inst(i).statement, &ctx.append_pool, plan.rng.random())?;
                plan.jobs.push((i, Job::Append(text)));
            }
        }
    }

    let Planner { jobs, mut skipped, .. } = plan;
    let (texts, backend_calls) = run_paraphrases(split, &jobs, ctx, &mut skipped)?;
    assemble(split, recipe, ctx.seed, jobs, texts, skipped, backend_calls)
}

/// Runs every paraphrase job with bounded concurrency. The result holds one
/// slot per job; `None` marks a job that is not a paraphrase or that failed.
fn run_paraphrases(
    split: &Split,
    jobs: &[(usize, Job)],
    ctx: &RecipeContext,
    skipped: &mut Vec<SkippedDerivation>,
) -> Result<(Vec<Option<String>>, usize), AugmentError> {
    let pending: Vec<(usize, usize, u64)> = jobs
        .iter()
        .enumerate()
        .filter_map(|(j, (i, job))| match job {
            Job::Paraphrase { seed } => Some((j, *i, *seed)),
            _ => None,
        })
        .collect();
    let mut texts: Vec<Option<String>> = (0..jobs.len()).map(|_| None).collect();
    let Some(backend) = ctx.backend.filter(|_| !pending.is_empty()) else {
        return Ok((texts, 0));
    };

    let calls = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let workers = ctx.batch.max_in_flight.max(1).min(pending.len());
    let (tx, rx) = mpsc::channel();
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next, calls) = (&pending, &next, &calls);
            scope.spawn(move || loop {
                let n = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(j, i, seed)) = pending.get(n) else { break };
                let params = GenerationParams {
                    seed: Some(seed),
                    ..ctx.params.clone()
                };
                let result = ctx.paraphraser.paraphrase_with(&split.instances()[i].statement, &params, |p, params| {
                    generate_with_retries(backend, p, params, &ctx.batch, calls).map_err(|(_, e)| e)
                });
                if tx.send((j, i, result)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);

    let mut results: Vec<_> = rx.into_iter().collect();
    results.sort_by_key(|(j, _, _)| *j);
    let mut failed = 0;
    for (j, i, result) in results {
        match result {
            Ok(text) => texts[j] = Some(text),
            Err(e) => {
                log::warn!("paraphrase of {} failed: {e}", split.instances()[i].id);
                failed += 1;
                skipped.push(SkippedDerivation {
                    base_id: split.instances()[i].id.clone(),
                    origin: Origin::BackendParaphrase,
                    reason: e.to_string(),
                });
            }
        }
    }
    let total = pending.len();
    if failed as f64 > ctx.batch.failure_ceiling * total as f64 {
        return Err(AugmentError::FailureCeilingExceeded {
            failed,
            total,
            ceiling: ctx.batch.failure_ceiling,
        });
    }
    Ok((texts, calls.into_inner()))
}

fn assemble(
    split: &Split,
    recipe: &Recipe,
    seed: u64,
    jobs: Vec<(usize, Job)>,
    mut texts: Vec<Option<String>>,
    skipped: Vec<SkippedDerivation>,
    backend_calls: usize,
) -> Result<AugmentedSplit, AugmentError> {
    let name = recipe.name();
    let mut instances: Vec<Instance> = split.instances().to_vec();
    let mut provenance: Vec<Provenance> = split
        .instances()
        .iter()
        .map(|inst| match &inst.intervention {
            None => Provenance::original(name),
            Some(meta) => Provenance {
                origin: Origin::Original,
                source_id: None,
                recipe: format!("{name}:{}", meta.kind.as_str()),
                low_confidence: false,
            },
        })
        .collect();
    let mut taken: HashSet<String> = instances.iter().map(|i| i.id.clone()).collect();
    let mut counts: BTreeMap<Origin, usize> = BTreeMap::new();
    counts.insert(Origin::Original, instances.len());

    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by_key(|&j| (jobs[j].0, jobs[j].1.rank(), j));
    let mut per_kind: BTreeMap<(usize, &'static str), usize> = BTreeMap::new();
    let mut low_confidence = 0;
    for j in order {
        let (i, job) = &jobs[j];
        let base = &split.instances()[*i];
        let (statement, low) = match job {
            Job::Curated(text) | Job::Append(text) => (text.clone(), false),
            Job::Negated { text, low_confidence } => (text.clone(), *low_confidence),
            Job::Paraphrase { .. } => match texts[j].take() {
                Some(text) => (text, false),
                None => continue,
            },
        };
        let origin = job.origin();
        let gold = base.gold.ok_or_else(|| AugmentError::UnlabeledInstance(base.id.clone()))?;
        let k = per_kind.entry((*i, job.id_suffix())).or_insert(0);
        *k += 1;
        let stem = match job {
            Job::Negated { .. } | Job::Append(_) => format!("{}_{}", base.id, job.id_suffix()),
            _ => format!("{}_{}{k}", base.id, job.id_suffix()),
        };
        let id = unique_id(&stem, &mut taken);
        instances.push(Instance {
            id,
            statement,
            gold: Some(if origin.flips_label() { gold.flip() } else { gold }),
            intervention: Some(InterventionMeta {
                base_id: base.id.clone(),
                kind: intervention_kind(origin),
            }),
            ..base.clone()
        });
        let mut prov = Provenance::derived(origin, &base.id, name);
        prov.low_confidence = low;
        low_confidence += usize::from(low);
        provenance.push(prov);
        *counts.entry(origin).or_insert(0) += 1;
    }

    let n_output = instances.len();
    let split = Split::new(format!("{}_{name}", split.name), instances)?;
    Ok(AugmentedSplit {
        split,
        provenance,
        report: AugmentReport {
            recipe: name.to_string(),
            seed,
            n_input: n_output - counts.iter().filter(|(o, _)| **o != Origin::Original).map(|(_, c)| c).sum::<usize>(),
            n_output,
            counts,
            low_confidence,
            backend_calls,
            skipped,
        },
    })
}

fn unique_id(stem: &str, taken: &mut HashSet<String>) -> String {
    let mut id = stem.to_string();
    let mut n = 2;
    while taken.contains(&id) {
        id = format!("{stem}_{n}");
        n += 1;
    }
    taken.insert(id.clone());
    id
}
