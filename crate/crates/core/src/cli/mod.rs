//! Command-line front end.

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::augment::{
    build_recipe, export_finetune_dataset, load_append_pool, records_to_jsonl, AugmentError, Paraphraser, RecipeContext,
};
use crate::corpus::{load_corpus, load_split, read_split, split_stats, CorpusError, CorpusStore, Split, SplitStats};
use crate::inference::{batch_predict, parse_predictions, Backend, GenerationCache, InferenceError};
use crate::metrics::{full_evaluate, MetricsError};
use crate::prompt::{compose_with, ChatWrapper, PartLibrary, PromptCombo, PromptError};
use crate::search::{grid_search, select_best, SearchConfig, SearchError};

pub use config::{AugmentSection, BatchConfig, LexiconConfig, RunConfig, SearchSection};

/// The combination used when neither the flag nor the config names one.
pub const DEFAULT_COMBO: &str = "t4.c1.s5.o4";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::FailureCeilingExceeded { .. } => CliError::Backend(e.to_string()),
            InferenceError::BadParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Inference(inner) => inner.into(),
            SearchError::NoSuccessfulCombo => CliError::Backend(e.to_string()),
            SearchError::BadConfig(_) | SearchError::LedgerMismatch { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::Backend(_) | AugmentError::FailureCeilingExceeded { .. } => CliError::Backend(e.to_string()),
            AugmentError::BackendRequired | AugmentError::BadRecipe(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ctr-nli", version, about = "Prompt search, augmentation and evaluation for clinical trial NLI")]
struct Cli {
    /// TOML run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true, env = "HARNESS_CONFIG")]
    config: Option<PathBuf>,
    /// Run seed; all randomness derives from it.
    #[arg(long, global = true, env = "HARNESS_SEED")]
    seed: Option<u64>,
    /// Use an HTTP backend at this URL.
    #[arg(long, global = true, env = "HARNESS_BACKEND_URL")]
    backend_url: Option<String>,
    #[arg(long, global = true, env = "HARNESS_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// CTR directory.
    #[arg(long, global = true, env = "HARNESS_CORPUS")]
    corpus: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print split statistics as a markdown table.
    Stats {
        /// Split files or config split names.
        splits: Vec<String>,
    },
    /// Predict labels for a split with one prompt combination.
    Predict {
        #[command(flatten)]
        split: SplitArg,
        #[arg(long, env = "HARNESS_COMBO")]
        combo: Option<String>,
    },
    /// Score a predictions file against a labeled split.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[command(flatten)]
        split: SplitArg,
    },
    /// Evaluate every prompt combination on a split.
    GridSearch {
        #[command(flatten)]
        split: SplitArg,
        #[arg(long, env = "HARNESS_SUBSAMPLE")]
        subsample: Option<f64>,
        #[arg(long, env = "HARNESS_RESUME")]
        resume: bool,
        /// Stop after this many new evaluations.
        #[arg(long)]
        max_evaluations: Option<usize>,
    },
    /// Build an augmented training split.
    Augment {
        #[command(flatten)]
        split: SplitArg,
        #[arg(long, env = "HARNESS_RECIPE")]
        recipe: Option<String>,
    },
    /// Write prompt/completion records for supervised fine-tuning.
    ExportFinetune {
        #[command(flatten)]
        split: SplitArg,
        #[arg(long, env = "HARNESS_COMBO")]
        combo: Option<String>,
    },
}

#[derive(Debug, Args)]
struct SplitArg {
    /// Config split name or split file.
    #[arg(long)]
    split: Option<String>,
}

impl SplitArg {
    fn or(&self, default: &str) -> String {
        self.split.clone().unwrap_or_else(|| default.to_string())
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    cfg: RunConfig,
    hash: String,
    command: &'static str,
}

impl Context {
    fn meta(&self) -> Value {
        json!({
            "command": self.command,
            "config_hash": self.hash,
            "seed": self.cfg.seed,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }

    fn out_path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.cfg.out_dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", self.cfg.out_dir.display())))?;
        Ok(self.cfg.out_dir.join(name))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_path(name)?;
        fs::write(&path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Markdown with a trailing comment carrying the config hash and seed.
    fn write_markdown(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let stamp = format!("<!-- config_hash: {} seed: {} -->\n", self.hash, self.cfg.seed);
        self.write(name, &format!("{body}\n{stamp}"))
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf, CliError> {
        self.write(name, &(serde_json::to_string_pretty(value).expect("json") + "\n"))
    }

    fn corpus(&self) -> Result<CorpusStore, CliError> {
        let dir = self
            .cfg
            .corpus
            .as_ref()
            .ok_or_else(|| CliError::Usage("no CTR corpus configured (--corpus or `corpus` in the config)".into()))?;
        if !dir.is_dir() {
            return Err(CliError::Data(format!("corpus directory {} does not exist", dir.display())));
        }
        Ok(load_corpus(dir)?)
    }

    fn split_path(&self, name: &str) -> Result<PathBuf, CliError> {
        let path = self.cfg.split_path(name);
        if !path.is_file() {
            return Err(CliError::Data(format!("split {name:?} not found at {}", path.display())));
        }
        Ok(path)
    }

    fn library(&self) -> Result<PartLibrary, CliError> {
        match &self.cfg.library {
            Some(p) => Ok(PartLibrary::load(p)?),
            None => Ok(PartLibrary::default_library()),
        }
    }

    fn combo(&self, flag: Option<&str>) -> Result<PromptCombo, CliError> {
        let text = flag.or(self.cfg.combo.as_deref()).unwrap_or(DEFAULT_COMBO);
        text.parse().map_err(|e: PromptError| CliError::Usage(e.to_string()))
    }

    fn backend(&self) -> Result<Box<dyn Backend>, CliError> {
        self.cfg.backend.build().map_err(CliError::Data)
    }

    fn cache(&self) -> Result<GenerationCache, CliError> {
        let path = match &self.cfg.cache {
            Some(p) => p.clone(),
            None => self.out_path("generation_cache.jsonl")?,
        };
        GenerationCache::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

fn split_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "split".into())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(url) = &cli.backend_url {
        cfg.set_backend_url(url);
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(dir) = &cli.corpus {
        cfg.corpus = Some(dir.clone());
    }
    let command = match &cli.command {
        Command::Stats { .. } => "stats",
        Command::Predict { .. } => "predict",
        Command::Evaluate { .. } => "evaluate",
        Command::GridSearch { .. } => "grid-search",
        Command::Augment { .. } => "augment",
        Command::ExportFinetune { .. } => "export-finetune",
    };
    match cli.command {
        Command::Stats { splits } => cmd_stats(&cfg, &splits),
        Command::Predict { split, combo } => {
            let ctx = Context { hash: cfg.hash(), cfg, command };
            cmd_predict(&ctx, &split.or("test"), combo.as_deref())
        }
        Command::Evaluate { predictions, split } => {
            let ctx = Context { hash: cfg.hash(), cfg, command };
            cmd_evaluate(&ctx, &predictions, &split.or("test"))
        }
        Command::GridSearch {
            split,
            subsample,
            resume,
            max_evaluations,
        } => {
            if subsample.is_some() {
                cfg.search.subsample = subsample;
            }
            cfg.search.resume |= resume;
            if max_evaluations.is_some() {
                cfg.search.max_evaluations = max_evaluations;
            }
            // The ledger hash leaves out resume and budget settings.
            let mut hashed = cfg.clone();
            hashed.search.resume = false;
            hashed.search.max_evaluations = None;
            let ctx = Context {
                hash: hashed.hash(),
                cfg,
                command,
            };
            cmd_grid_search(&ctx, &split.or("dev"))
        }
        Command::Augment { split, recipe } => {
            if recipe.is_some() {
                cfg.augment.recipe = recipe;
            }
            let ctx = Context { hash: cfg.hash(), cfg, command };
            cmd_augment(&ctx, &split.or("train"))
        }
        Command::ExportFinetune { split, combo } => {
            let ctx = Context { hash: cfg.hash(), cfg, command };
            cmd_export_finetune(&ctx, &split.or("train"), combo.as_deref())
        }
    }
}

fn cmd_stats(cfg: &RunConfig, splits: &[String]) -> Result<(), CliError> {
    let names: Vec<String> = if splits.is_empty() {
        cfg.splits.keys().cloned().collect()
    } else {
        splits.to_vec()
    };
    if names.is_empty() {
        return Err(CliError::Usage(
            "no splits given; pass split files or configure [splits]".into(),
        ));
    }
    let mut out = SplitStats::markdown_header().to_string();
    for name in names {
        let path = cfg.split_path(&name);
        let split = read_split(&path)?;
        let label = if cfg.splits.contains_key(&name) { name.clone() } else { split_stem(&path) };
        out.push('\n');
        out.push_str(&split_stats(&split).markdown_row(&label));
    }
    println!("{out}");
    Ok(())
}

fn cmd_predict(ctx: &Context, split_name: &str, combo: Option<&str>) -> Result<(), CliError> {
    let combo = ctx.combo(combo)?;
    let library = ctx.library()?;
    let corpus = ctx.corpus()?;
    let path = ctx.split_path(split_name)?;
    let split = load_split(&path, &corpus)?;
    let skeleton = compose_with(combo, &library, ChatWrapper::default())?;
    let backend = ctx.backend()?;
    let cache = ctx.cache()?;
    let outcome = batch_predict(
        &split,
        &skeleton,
        &corpus,
        backend.as_ref(),
        &ctx.cfg.effective_params(),
        &ctx.cfg.lexicon()?,
        &cache,
        &ctx.cfg.batch_options()?,
    )?;
    let stem = split_stem(&path);
    let written = ctx.write_json(&format!("predictions_{stem}.json"), &outcome.predictions.to_submission_json())?;
    ctx.write_json(
        &format!("predictions_{stem}.meta.json"),
        &json!({
            "_meta": ctx.meta(),
            "split": path,
            "provenance": outcome.predictions.provenance,
            "backend_calls": outcome.backend_calls,
            "cache_hits": outcome.cache_hits,
        }),
    )?;
    println!("{}", written.display());
    Ok(())
}

fn cmd_evaluate(ctx: &Context, predictions: &Path, split_name: &str) -> Result<(), CliError> {
    let text = fs::read_to_string(predictions).map_err(|e| CliError::Data(format!("{}: {e}", predictions.display())))?;
    let preds = parse_predictions(&text)?;
    let path = ctx.split_path(split_name)?;
    let split: Split = read_split(&path)?;
    let report = full_evaluate(&preds, &split)?;
    let stem = split_stem(predictions);
    let mut json = report.to_json();
    json["_meta"] = ctx.meta();
    ctx.write_json(&format!("report_{stem}.json"), &json)?;
    let markdown = report.to_markdown(&stem);
    ctx.write_markdown(&format!("report_{stem}.md"), &markdown)?;
    print!("{markdown}");
    Ok(())
}

fn cmd_grid_search(ctx: &Context, split_name: &str) -> Result<(), CliError> {
    let library = ctx.library()?;
    let corpus = ctx.corpus()?;
    let split = load_split(ctx.split_path(split_name)?, &corpus)?;
    let backend = ctx.backend()?;
    let cache = ctx.cache()?;
    let s = &ctx.cfg.search;
    let config = SearchConfig {
        params: ctx.cfg.effective_params(),
        batch: ctx.cfg.batch_options()?,
        lexicon: ctx.cfg.lexicon()?,
        wrapper: ChatWrapper::default(),
        subsample: s.subsample,
        seed: ctx.cfg.seed,
        ledger: Some(ctx.out_path("grid_ledger.jsonl")?),
        resume: s.resume,
        max_evaluations: s.max_evaluations,
        config_hash: ctx.hash.clone(),
    };
    let result = grid_search(&split, &corpus, &library, backend.as_ref(), &cache, &config)?;
    ctx.write_json("grid_result.json", &result.to_json(Some(ctx.meta())))?;
    ctx.write_markdown("leaderboard.md", &result.to_markdown(None))?;
    if !result.is_complete() {
        eprintln!(
            "{} combination(s) left; rerun with --resume to continue",
            result.pending.len()
        );
        return Ok(());
    }
    let best = select_best(&result)?;
    let top = &result.ranked[0];
    ctx.write_json(
        "best_combo.json",
        &json!({
            "combo": best,
            "macro_f1": crate::metrics::to_f64(top.macro_f1),
            "macro_f1_exact": top.macro_f1.to_string(),
            "_meta": ctx.meta(),
        }),
    )?;
    print!("{}", result.to_markdown(Some(10)));
    println!("best: {best}");
    Ok(())
}

fn cmd_augment(ctx: &Context, split_name: &str) -> Result<(), CliError> {
    let recipe_name = ctx
        .cfg
        .augment
        .recipe
        .clone()
        .ok_or_else(|| CliError::Usage("no recipe given (--recipe or augment.recipe)".into()))?;
    let recipe = ctx.cfg.recipe(&recipe_name)?;
    let path = ctx.split_path(split_name)?;
    let split = match ctx.cfg.corpus {
        Some(_) => load_split(&path, &ctx.corpus()?)?,
        None => read_split(&path)?,
    };
    let backend = ctx.backend()?;
    let mut rc = RecipeContext::new(ctx.cfg.seed).with_backend(backend.as_ref());
    rc.params = ctx.cfg.effective_params();
    rc.batch = ctx.cfg.batch_options()?;
    if let Some(pool) = &ctx.cfg.augment.append_pool {
        rc.append_pool = load_append_pool(pool)?;
    }
    if let Some(instruction) = &ctx.cfg.augment.paraphrase_instruction {
        rc.paraphraser = Paraphraser {
            instruction: instruction.clone(),
        };
    }
    let out = build_recipe(&split, &recipe, &rc)?;
    out.check_bookkeeping().map_err(CliError::Data)?;
    let stem = format!("{}_{}", split_stem(&path), recipe.name());
    let written = ctx.write(&format!("{stem}.json"), &(out.split.to_json_string() + "\n"))?;
    ctx.write_json(
        &format!("{stem}.provenance.json"),
        &json!({
            "_meta": ctx.meta(),
            "recipe": recipe,
            "report": out.report,
            "provenance": out.provenance_json(),
        }),
    )?;
    let r = &out.report;
    println!(
        "{}: {} -> {} instances ({} skipped derivations)",
        written.display(),
        r.n_input,
        r.n_output,
        r.skipped.len()
    );
    Ok(())
}

fn cmd_export_finetune(ctx: &Context, split_name: &str, combo: Option<&str>) -> Result<(), CliError> {
    let combo = ctx.combo(combo)?;
    let library = ctx.library()?;
    let corpus = ctx.corpus()?;
    let path = ctx.split_path(split_name)?;
    let split = load_split(&path, &corpus)?;
    let skeleton = compose_with(combo, &library, ChatWrapper::default())?;
    let records = export_finetune_dataset(&split, &skeleton, &corpus, &ctx.cfg.lexicon()?)?;
    let stem = split_stem(&path);
    let mut buf = Vec::new();
    records_to_jsonl(&records, &mut buf).expect("in-memory write");
    let written = ctx.write(&format!("finetune_{stem}.jsonl"), &String::from_utf8(buf).expect("utf-8 json"))?;
    ctx.write_json(
        &format!("finetune_{stem}.meta.json"),
        &json!({ "_meta": ctx.meta(), "combo": combo, "split": path, "records": records.len() }),
    )?;
    println!("{}", written.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["ctr-nli"]), 1);
        assert_eq!(run(["ctr-nli", "bogus"]), 1);
        assert_eq!(run(["ctr-nli", "stats"]), 1);
        assert_eq!(run(["ctr-nli", "--help"]), 0);
    }

    #[test]
    fn missing_split_is_a_data_error() {
        assert_eq!(run(["ctr-nli", "stats", "/nonexistent/split.json"]), 2);
    }
}
