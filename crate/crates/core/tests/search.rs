use std::path::{Path, PathBuf};
use std::time::Instant;

use ctr_nli::corpus::{load_corpus, load_split, resolve_evidence, CorpusStore, Label, Split};
use ctr_nli::inference::{GenerationCache, ScriptedBackend};
use ctr_nli::prompt::{compose, enumerate_combos, PartLibrary, PromptCombo};
use ctr_nli::search::{grid_search, read_ledger, select_best, SearchConfig, Status};
use num_rational::Ratio;
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn load() -> (CorpusStore, Split) {
    let corpus = load_corpus(fixtures().join("corpus")).unwrap();
    let split = load_split(fixtures().join("split.json"), &corpus).unwrap();
    (corpus, split)
}

/// A backend that answers every instance correctly for combos accepted by
/// `rigged` and "Yes" otherwise.
fn rigged_backend(corpus: &CorpusStore, split: &Split, rigged: impl Fn(PromptCombo) -> bool) -> ScriptedBackend {
    let library = PartLibrary::default_library();
    let mut backend = ScriptedBackend::new("Yes");
    for combo in enumerate_combos(&library).into_iter().filter(|c| rigged(*c)) {
        let skeleton = compose(combo, &library).unwrap();
        for inst in split.instances() {
            let prompt = skeleton.render(&resolve_evidence(inst, corpus).unwrap(), &inst.statement).unwrap();
            let answer = match inst.gold.unwrap() {
                Label::Entailment => "Yes",
                Label::Contradiction => "No",
            };
            backend = backend.answer(&prompt, answer);
        }
    }
    backend
}

fn config(ledger: Option<PathBuf>) -> SearchConfig {
    SearchConfig {
        ledger,
        config_hash: "test".into(),
        ..SearchConfig::default()
    }
}

#[test]
fn default_library_has_625_combos_and_ledger_gets_every_one() {
    let library = PartLibrary::default_library();
    assert_eq!(enumerate_combos(&library).len(), 625);
    let (corpus, split) = load();
    let dir = TempDir::new().unwrap();
    let ledger = dir.path().join("ledger.jsonl");
    let start = Instant::now();
    let result = grid_search(
        &split,
        &corpus,
        &library,
        &ScriptedBackend::new("Yes"),
        &GenerationCache::in_memory(),
        &config(Some(ledger.clone())),
    )
    .unwrap();
    assert!(start.elapsed().as_secs() < 60);
    assert_eq!(result.ranked.len(), 625);
    let entries = read_ledger(&ledger).unwrap();
    assert_eq!(entries.len(), 625);
    assert!(entries.iter().all(|e| e.status == Status::Ok && e.n == 20));
    // All-Entailment on a balanced split.
    assert!(result.ranked.iter().all(|r| r.macro_f1 == Ratio::new(1, 3)));
    assert_eq!(select_best(&result).unwrap().to_string(), "t1.c1.s1.o1");
}

#[test]
fn search_finds_the_rigged_combo() {
    let (corpus, split) = load();
    let target: PromptCombo = "t2.c3.s1.o4".parse().unwrap();
    let backend = rigged_backend(&corpus, &split, |c| c == target);
    let result = grid_search(
        &split,
        &corpus,
        &PartLibrary::default_library(),
        &backend,
        &GenerationCache::in_memory(),
        &config(None),
    )
    .unwrap();
    assert_eq!(select_best(&result).unwrap(), target);
    assert_eq!(result.ranked[0].macro_f1, Ratio::from_integer(1));
    assert_eq!(result.ranked[1].macro_f1, Ratio::new(1, 3));
}

#[test]
fn ties_break_towards_the_lowest_combo() {
    let (corpus, split) = load();
    let backend = rigged_backend(&corpus, &split, |c| c.to_string().ends_with(".o4"));
    let result = grid_search(
        &split,
        &corpus,
        &PartLibrary::default_library(),
        &backend,
        &GenerationCache::in_memory(),
        &config(None),
    )
    .unwrap();
    let top: Vec<_> = result.ranked.iter().take_while(|r| r.macro_f1 == Ratio::from_integer(1)).collect();
    assert_eq!(top.len(), 125);
    assert_eq!(select_best(&result).unwrap().to_string(), "t1.c1.s1.o4");
    assert!(top.windows(2).all(|w| w[0].combo < w[1].combo));
}

#[test]
fn subsampled_search_is_seeded() {
    let (corpus, split) = load();
    let run = |seed| {
        let cfg = SearchConfig {
            subsample: Some(0.5),
            seed,
            ..config(None)
        };
        let backend = rigged_backend(&corpus, &split, |c| c.to_string().starts_with("t3.c2"));
        grid_search(&split, &corpus, &PartLibrary::default_library(), &backend, &GenerationCache::in_memory(), &cfg)
            .unwrap()
    };
    let a = run(1);
    assert_eq!(a.ranked[0].n, 10);
    assert_eq!(a.ranked, run(1).ranked);
    assert_eq!(select_best(&a).unwrap().to_string(), "t3.c2.s1.o1");
}
