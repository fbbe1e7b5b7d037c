use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::augment::Recipe;
use crate::corpus::Label;
use crate::inference::{BackendKind, BackendSpec, BatchOptions, GenerationParams, LabelLexicon};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    pub entail: Vec<String>,
    pub contra: Vec<String>,
    #[serde(default = "default_label")]
    pub default: Label,
}

fn default_label() -> Label {
    Label::Entailment
}

impl Default for LexiconConfig {
    fn default() -> Self {
        let l = LabelLexicon::default();
        Self {
            entail: l.entail_tokens().to_vec(),
            contra: l.contra_tokens().to_vec(),
            default: l.default_label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatchConfig {
    pub retries: u32,
    pub backoff_ms: u64,
    pub failure_ceiling: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        let b = BatchOptions::default();
        Self {
            retries: b.retries,
            backoff_ms: b.backoff.as_millis() as u64,
            failure_ceiling: b.failure_ceiling,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub subsample: Option<f64>,
    pub resume: bool,
    pub max_evaluations: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub recipe: Option<String>,
    pub curated: Option<PathBuf>,
    pub synthetic: Option<usize>,
    pub paraphrases: Option<u32>,
    pub negate_fraction: Option<f64>,
    pub paraphrase_multiplier: Option<u32>,
    pub append_fraction: Option<f64>,
    pub append_pool: Option<PathBuf>,
    pub paraphrase_instruction: Option<String>,
}

/// Everything a command needs, after file loading and overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub splits: BTreeMap<String, PathBuf>,
    pub library: Option<PathBuf>,
    pub combo: Option<String>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub cache: Option<PathBuf>,
    #[serde(default = "default_backend")]
    pub backend: BackendSpec,
    #[serde(default)]
    pub params: GenerationParams,
    #[serde(default)]
    pub lexicon: LexiconConfig,
    #[serde(default)]
    pub batch: BatchConfig,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub augment: AugmentSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_backend() -> BackendSpec {
    BackendSpec::scripted(None)
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl RunConfig {
    /// Parses a TOML config; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.corpus, &mut self.library, &mut self.cache, &mut self.augment.curated, &mut self.augment.append_pool]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        self.splits.values_mut().for_each(fix);
        fix(&mut self.out_dir);
        if let BackendKind::Scripted { fixture: Some(p) } = &mut self.backend.kind {
            fix(p);
        }
    }

    pub fn set_backend_url(&mut self, url: &str) {
        let wire = match &self.backend.kind {
            BackendKind::Http { wire, .. } => *wire,
            BackendKind::Scripted { .. } => Default::default(),
        };
        self.backend.kind = BackendKind::Http {
            url: url.to_string(),
            wire,
        };
    }

    /// Generation parameters with the run seed filled in.
    pub fn effective_params(&self) -> GenerationParams {
        let mut p = self.params.clone();
        p.seed.get_or_insert(self.seed);
        p
    }

    pub fn lexicon(&self) -> Result<LabelLexicon, CliError> {
        LabelLexicon::new(self.lexicon.entail.clone(), self.lexicon.contra.clone(), self.lexicon.default)
            .map_err(|e| CliError::Usage(format!("lexicon: {e}")))
    }

    pub fn batch_options(&self) -> Result<BatchOptions, CliError> {
        let b = &self.batch;
        if !(0.0..=1.0).contains(&b.failure_ceiling) {
            return Err(CliError::Usage(format!("failure_ceiling must lie in [0, 1], got {}", b.failure_ceiling)));
        }
        Ok(BatchOptions {
            max_in_flight: self.backend.max_in_flight,
            retries: b.retries,
            backoff: Duration::from_millis(b.backoff_ms),
            failure_ceiling: b.failure_ceiling,
        })
    }

    /// A split by config name, or else as a path.
    pub fn split_path(&self, name_or_path: &str) -> PathBuf {
        self.splits
            .get(name_or_path)
            .cloned()
            .unwrap_or_else(|| PathBuf::from(name_or_path))
    }

    pub fn recipe(&self, name: &str) -> Result<Recipe, CliError> {
        let a = &self.augment;
        let curated = || {
            a.curated
                .clone()
                .ok_or_else(|| CliError::Usage(format!("recipe {name} needs augment.curated")))
        };
        let recipe = match name.replace('-', "_").to_lowercase().as_str() {
            "manual" => Recipe::Manual { curated: curated()? },
            "manual_synthetic" => Recipe::ManualSynthetic {
                curated: curated()?,
                synthetic: a.synthetic.unwrap_or(1376),
            },
            "full_synthetic" => Recipe::FullSynthetic {
                paraphrases: a.paraphrases.unwrap_or(5),
            },
            "custom" => Recipe::Custom {
                negate_fraction: a.negate_fraction.unwrap_or(0.0),
                paraphrase_multiplier: a.paraphrase_multiplier.unwrap_or(0),
                append_fraction: a.append_fraction.unwrap_or(0.0),
            },
            other => {
                return Err(CliError::Usage(format!(
                    "unknown recipe {other:?}; expected manual, manual_synthetic, full_synthetic or custom"
                )))
            }
        };
        recipe.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(recipe)
    }

    /// SHA-256 of the canonical JSON form of the effective config. Output and
    /// cache locations are left out.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let obj = value.as_object_mut().expect("struct serializes to an object");
        obj.remove("out_dir");
        obj.remove("cache");
        crate::inference::sha256_hex(value.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_resolve_against_config_dir() {
        let cfg = RunConfig::from_toml(
            r#"
seed = 3
corpus = "ctrs"
out_dir = "/abs/out"
[splits]
dev = "dev.json"
[backend]
kind = "scripted"
fixture = "answers.json"
"#,
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(cfg.corpus.as_deref(), Some(Path::new("/cfg/ctrs")));
        assert_eq!(cfg.split_path("dev"), PathBuf::from("/cfg/dev.json"));
        assert_eq!(cfg.split_path("x.json"), PathBuf::from("x.json"));
        assert_eq!(cfg.out_dir, PathBuf::from("/abs/out"));
        assert_eq!(cfg.effective_params().seed, Some(3));
        assert!(matches!(cfg.backend.kind, BackendKind::Scripted { fixture: Some(ref p) } if p == Path::new("/cfg/answers.json")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sede = 1", Path::new(".")), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.out_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 9;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn recipes_by_name() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.recipe("full-synthetic").unwrap(), Recipe::full_synthetic());
        assert!(matches!(cfg.recipe("manual"), Err(CliError::Usage(_))));
        assert!(matches!(cfg.recipe("bogus"), Err(CliError::Usage(_))));
    }
}
