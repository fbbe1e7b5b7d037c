//! Clinical trial reports, task instances and splits.
//!
//! CTRs are read one JSON document per file; a split is a single JSON object
//! mapping instance ids to instance records. Both are immutable once loaded.

mod stats;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use stats::{split_stats, SplitStats};

/// Key reserved for run metadata in JSON object outputs; never an instance id.
pub const META_KEY: &str = "_meta";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed document {path}: {reason}")]
    MalformedDocument { path: PathBuf, reason: String },
    #[error("duplicate CTR id {0}")]
    DuplicateCtrId(String),
    #[error("instance {instance} references unknown CTR {ctr}")]
    DanglingCtrRef { instance: String, ctr: String },
    #[error("instance {instance} derives from unknown base instance {base}")]
    DanglingBaseRef { instance: String, base: String },
    #[error("instance {instance} derives from {base}, which is itself an intervention")]
    NestedIntervention { instance: String, base: String },
    #[error("unknown section {0:?}")]
    UnknownSection(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("unknown intervention kind {0:?}")]
    UnknownInterventionKind(String),
    #[error("instance {instance}: type {declared} disagrees with secondary CTR presence")]
    KindMismatch { instance: String, declared: String },
    #[error("instance {0} has an empty statement")]
    EmptyStatement(String),
    #[error("duplicate instance id {0}")]
    DuplicateInstanceId(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Lowercases and folds `_`/`-` to spaces so aliases compare equal.
fn fold_name(s: &str) -> String {
    s.trim()
        .chars()
        .map(|c| if c == '_' || c == '-' { ' ' } else { c.to_ascii_lowercase() })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SectionKind {
    EligibilityCriteria,
    Intervention,
    Results,
    AdverseEvents,
}

impl SectionKind {
    pub const ALL: [SectionKind; 4] = [
        SectionKind::EligibilityCriteria,
        SectionKind::Intervention,
        SectionKind::Results,
        SectionKind::AdverseEvents,
    ];

    /// Canonical name as used for CTR file keys and split `Section_id`s.
    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::EligibilityCriteria => "Eligibility",
            SectionKind::Intervention => "Intervention",
            SectionKind::Results => "Results",
            SectionKind::AdverseEvents => "Adverse Events",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_name(s).as_str() {
            "eligibility" | "eligibility criteria" => Ok(SectionKind::EligibilityCriteria),
            "intervention" | "interventions" => Ok(SectionKind::Intervention),
            "results" | "result" => Ok(SectionKind::Results),
            "adverse events" | "adverse event" => Ok(SectionKind::AdverseEvents),
            _ => Err(CorpusError::UnknownSection(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Entailment,
    Contradiction,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Entailment, Label::Contradiction];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "Entailment",
            Label::Contradiction => "Contradiction",
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Entailment => Label::Contradiction,
            Label::Contradiction => Label::Entailment,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_name(s).as_str() {
            "entailment" => Ok(Label::Entailment),
            "contradiction" => Ok(Label::Contradiction),
            _ => Err(CorpusError::UnknownLabel(s.to_string())),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelEffect {
    Preserving,
    Altering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InterventionKind {
    Paraphrase,
    Contradiction,
    TextAppend,
    NumericalParaphrase,
    NumericalContradiction,
}

impl InterventionKind {
    pub const ALL: [InterventionKind; 5] = [
        InterventionKind::Paraphrase,
        InterventionKind::TextAppend,
        InterventionKind::Contradiction,
        InterventionKind::NumericalParaphrase,
        InterventionKind::NumericalContradiction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterventionKind::Paraphrase => "Paraphrase",
            InterventionKind::Contradiction => "Contradiction",
            InterventionKind::TextAppend => "Text_Append",
            InterventionKind::NumericalParaphrase => "Numerical_Paraphrase",
            InterventionKind::NumericalContradiction => "Numerical_Contradiction",
        }
    }

    /// Canonical kind → label-effect mapping.
    pub fn label_effect(self) -> LabelEffect {
        match self {
            InterventionKind::Paraphrase
            | InterventionKind::TextAppend
            | InterventionKind::NumericalParaphrase => LabelEffect::Preserving,
            InterventionKind::Contradiction | InterventionKind::NumericalContradiction => {
                LabelEffect::Altering
            }
        }
    }
}

impl fmt::Display for InterventionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterventionKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = fold_name(s).chars().filter(|c| *c != ' ').collect();
        match folded.as_str() {
            "paraphrase" => Ok(InterventionKind::Paraphrase),
            "contradiction" => Ok(InterventionKind::Contradiction),
            "textappend" => Ok(InterventionKind::TextAppend),
            "numericalparaphrase" => Ok(InterventionKind::NumericalParaphrase),
            "numericalcontradiction" => Ok(InterventionKind::NumericalContradiction),
            _ => Err(CorpusError::UnknownInterventionKind(s.to_string())),
        }
    }
}

/// Link from a derived statement to the base statement it was rewritten from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionMeta {
    pub base_id: String,
    pub kind: InterventionKind,
}

impl InterventionMeta {
    pub fn label_effect(&self) -> LabelEffect {
        self.kind.label_effect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstanceKind {
    Single,
    Comparison,
}

impl InstanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InstanceKind::Single => "Single",
            InstanceKind::Comparison => "Comparison",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClinicalTrialRecord {
    id: String,
    sections: [Vec<String>; 4],
}

impl ClinicalTrialRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            sections: Default::default(),
        }
    }

    pub fn with_section(mut self, kind: SectionKind, lines: Vec<String>) -> Self {
        self.sections[kind.index()] = lines;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn section(&self, kind: SectionKind) -> &[String] {
        &self.sections[kind.index()]
    }
}

/// All CTRs of a corpus keyed by trial id.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    records: BTreeMap<String, ClinicalTrialRecord>,
    warnings: Vec<String>,
}

impl CorpusStore {
    pub fn from_records(
        records: impl IntoIterator<Item = ClinicalTrialRecord>,
    ) -> Result<Self, CorpusError> {
        let mut store = CorpusStore::default();
        for record in records {
            store.insert(record)?;
        }
        Ok(store)
    }

    fn insert(&mut self, record: ClinicalTrialRecord) -> Result<(), CorpusError> {
        if self.records.contains_key(record.id()) {
            return Err(CorpusError::DuplicateCtrId(record.id.clone()));
        }
        self.records.insert(record.id.clone(), record);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ClinicalTrialRecord> {
        self.records.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClinicalTrialRecord> {
        self.records.values()
    }

    /// Non-fatal issues noticed while loading (e.g. defaulted sections).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

const CTR_ID_KEY: &str = "Clinical Trial ID";

/// Parses one CTR document. Missing sections default to empty with a warning.
pub fn parse_ctr(text: &str, path: &Path) -> Result<(ClinicalTrialRecord, Vec<String>), CorpusError> {
    let malformed = |reason: String| CorpusError::MalformedDocument {
        path: path.to_path_buf(),
        reason,
    };
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(malformed("expected a JSON object".into()));
    };
    let id = match map.get(CTR_ID_KEY) {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(_) => return Err(malformed(format!("{CTR_ID_KEY:?} must be a nonempty string"))),
        None => return Err(malformed(format!("missing {CTR_ID_KEY:?}"))),
    };

    let mut record = ClinicalTrialRecord::new(id.clone());
    let mut seen = [false; 4];
    let mut warnings = Vec::new();
    for (key, value) in &map {
        if key == CTR_ID_KEY {
            continue;
        }
        let Ok(kind) = key.parse::<SectionKind>() else {
            warnings.push(format!("{id}: ignoring unknown key {key:?}"));
            continue;
        };
        let lines = match value {
            Value::Array(items) => items
                .iter()
                .map(|item| match item {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(malformed(format!("section {key:?} must hold strings"))),
                })
                .collect::<Result<Vec<_>, _>>()?,
            Value::Null => Vec::new(),
            _ => return Err(malformed(format!("section {key:?} must be a list"))),
        };
        if seen[kind.index()] {
            return Err(malformed(format!("section {kind} given twice")));
        }
        seen[kind.index()] = true;
        record.sections[kind.index()] = lines;
    }
    for kind in SectionKind::ALL {
        if !seen[kind.index()] {
            warnings.push(format!("{id}: missing section {kind:?}, defaulting to empty"));
        }
    }
    Ok((record, warnings))
}

/// Loads every `*.json` file of `dir` as one CTR.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<CorpusStore, CorpusError> {
    let dir = dir.as_ref();
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            paths.push(path);
        }
    }
    paths.sort();

    let mut store = CorpusStore::default();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let (record, warnings) = parse_ctr(&text, &path)?;
        for w in &warnings {
            log::warn!("{w}");
        }
        store.warnings.extend(warnings);
        store.insert(record)?;
    }
    Ok(store)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub section: SectionKind,
    pub primary_ctr: String,
    pub secondary_ctr: Option<String>,
    pub statement: String,
    pub gold: Option<Label>,
    pub intervention: Option<InterventionMeta>,
}

impl Instance {
    pub fn kind(&self) -> InstanceKind {
        if self.secondary_ctr.is_some() {
            InstanceKind::Comparison
        } else {
            InstanceKind::Single
        }
    }

    pub fn is_base(&self) -> bool {
        self.intervention.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub name: String,
    instances: Vec<Instance>,
}

impl Split {
    /// Builds a split, checking id uniqueness, statements and base links.
    pub fn new(name: impl Into<String>, instances: Vec<Instance>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::new();
        for inst in &instances {
            if !ids.insert(inst.id.as_str()) {
                return Err(CorpusError::DuplicateInstanceId(inst.id.clone()));
            }
            if inst.statement.trim().is_empty() {
                return Err(CorpusError::EmptyStatement(inst.id.clone()));
            }
        }
        let by_id: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
        for inst in &instances {
            if let Some(meta) = &inst.intervention {
                match by_id.get(meta.base_id.as_str()) {
                    None => {
                        return Err(CorpusError::DanglingBaseRef {
                            instance: inst.id.clone(),
                            base: meta.base_id.clone(),
                        })
                    }
                    Some(base) if base.intervention.is_some() => {
                        return Err(CorpusError::NestedIntervention {
                            instance: inst.id.clone(),
                            base: meta.base_id.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(Self {
            name: name.into(),
            instances,
        })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn index_by_id(&self) -> HashMap<&str, usize> {
        self.instances
            .iter()
            .enumerate()
            .map(|(i, inst)| (inst.id.as_str(), i))
            .collect()
    }

    /// Checks that every CTR reference resolves in `corpus`.
    pub fn check_refs(&self, corpus: &CorpusStore) -> Result<(), CorpusError> {
        for inst in &self.instances {
            for ctr in std::iter::once(&inst.primary_ctr).chain(inst.secondary_ctr.as_ref()) {
                if !corpus.contains(ctr) {
                    return Err(CorpusError::DanglingCtrRef {
                        instance: inst.id.clone(),
                        ctr: ctr.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Serializes to the split file shape, preserving instance order.
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for inst in &self.instances {
            map.insert(inst.id.clone(), serde_json::to_value(RawInstance::from(inst)).expect("plain data"));
        }
        Value::Object(map)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("plain data")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawIntervention {
    #[serde(rename = "Base_id")]
    base_id: String,
    #[serde(rename = "Kind")]
    kind: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawInstance {
    #[serde(rename = "Type", default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(rename = "Section_id")]
    section: String,
    #[serde(rename = "Primary_id")]
    primary: String,
    #[serde(rename = "Secondary_id", default, skip_serializing_if = "Option::is_none")]
    secondary: Option<String>,
    #[serde(rename = "Statement")]
    statement: String,
    #[serde(rename = "Label", default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(rename = "Intervention", default, skip_serializing_if = "Option::is_none")]
    intervention: Option<RawIntervention>,
}

impl From<&Instance> for RawInstance {
    fn from(inst: &Instance) -> Self {
        RawInstance {
            kind: Some(inst.kind().as_str().to_string()),
            section: inst.section.as_str().to_string(),
            primary: inst.primary_ctr.clone(),
            secondary: inst.secondary_ctr.clone(),
            statement: inst.statement.clone(),
            label: inst.gold.map(|l| l.as_str().to_string()),
            intervention: inst.intervention.as_ref().map(|m| RawIntervention {
                base_id: m.base_id.clone(),
                kind: m.kind.as_str().to_string(),
            }),
        }
    }
}

impl RawInstance {
    fn into_instance(self, id: String) -> Result<Instance, CorpusError> {
        let secondary = self.secondary.filter(|s| !s.trim().is_empty());
        if let Some(declared) = &self.kind {
            let comparison = match fold_name(declared).as_str() {
                "single" => false,
                "comparison" => true,
                _ => {
                    return Err(CorpusError::KindMismatch {
                        instance: id,
                        declared: declared.clone(),
                    })
                }
            };
            if comparison != secondary.is_some() {
                return Err(CorpusError::KindMismatch {
                    instance: id,
                    declared: declared.clone(),
                });
            }
        }
        Ok(Instance {
            section: self.section.parse()?,
            primary_ctr: self.primary,
            secondary_ctr: secondary,
            statement: self.statement,
            gold: self.label.as_deref().map(str::parse).transpose()?,
            intervention: self
                .intervention
                .map(|raw| -> Result<_, CorpusError> {
                    Ok(InterventionMeta {
                        base_id: raw.base_id,
                        kind: raw.kind.parse()?,
                    })
                })
                .transpose()?,
            id,
        })
    }
}

/// Parses a split document without resolving CTR references.
pub fn parse_split(text: &str, name: &str, path: &Path) -> Result<Split, CorpusError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CorpusError::MalformedDocument {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let Value::Object(map) = value else {
        return Err(CorpusError::MalformedDocument {
            path: path.to_path_buf(),
            reason: "expected a JSON object keyed by instance id".into(),
        });
    };
    let mut instances = Vec::with_capacity(map.len());
    for (id, raw) in map {
        if id == META_KEY {
            continue;
        }
        let raw: RawInstance = serde_json::from_value(raw).map_err(|e| CorpusError::MalformedDocument {
            path: path.to_path_buf(),
            reason: format!("instance {id}: {e}"),
        })?;
        instances.push(raw.into_instance(id)?);
    }
    Split::new(name, instances)
}

fn split_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a split file without a corpus (statistics, evaluation).
pub fn read_split(path: impl AsRef<Path>) -> Result<Split, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_split(&text, &split_name(path), path)
}

/// Reads a split and checks all CTR references against `corpus`.
pub fn load_split(path: impl AsRef<Path>, corpus: &CorpusStore) -> Result<Split, CorpusError> {
    let split = read_split(path)?;
    split.check_refs(corpus)?;
    Ok(split)
}

/// Section text for the prompt's evidence slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceBundle {
    pub primary: String,
    pub secondary: Option<String>,
}

/// Formats CTR lines: header lines (ending in `:`) stay bare, others get a bullet.
pub fn format_evidence(lines: &[String]) -> String {
    lines
        .iter()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            if l.ends_with(':') || l.starts_with('•') {
                l.to_string()
            } else {
                format!("• {l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn resolve_evidence(instance: &Instance, corpus: &CorpusStore) -> Result<EvidenceBundle, CorpusError> {
    let lookup = |ctr: &String| {
        corpus.get(ctr).ok_or_else(|| CorpusError::DanglingCtrRef {
            instance: instance.id.clone(),
            ctr: ctr.clone(),
        })
    };
    let primary = format_evidence(lookup(&instance.primary_ctr)?.section(instance.section));
    let secondary = instance
        .secondary_ctr
        .as_ref()
        .map(|ctr| lookup(ctr).map(|r| format_evidence(r.section(instance.section))))
        .transpose()?;
    Ok(EvidenceBundle { primary, secondary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctr_json(id: &str) -> String {
        format!(
            r#"{{"Clinical Trial ID": "{id}", "Intervention": ["INTERVENTION 1:", "  Letrozole"], "Eligibility": [], "Results": ["r"], "Adverse Events": []}}"#
        )
    }

    #[test]
    fn section_aliases_normalize() {
        assert_eq!("Eligibility Criteria".parse::<SectionKind>().unwrap(), SectionKind::EligibilityCriteria);
        assert_eq!("adverse_events".parse::<SectionKind>().unwrap(), SectionKind::AdverseEvents);
        assert_eq!("ADVERSE EVENTS".parse::<SectionKind>().unwrap(), SectionKind::AdverseEvents);
        assert!(matches!("Methods".parse::<SectionKind>(), Err(CorpusError::UnknownSection(_))));
    }

    #[test]
    fn kind_effect_mapping() {
        use InterventionKind::*;
        for k in [Paraphrase, TextAppend, NumericalParaphrase] {
            assert_eq!(k.label_effect(), LabelEffect::Preserving);
        }
        for k in [Contradiction, NumericalContradiction] {
            assert_eq!(k.label_effect(), LabelEffect::Altering);
        }
        assert_eq!("text_append".parse::<InterventionKind>().unwrap(), TextAppend);
    }

    #[test]
    fn load_two_files_and_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_corpus(dir.path()).unwrap().is_empty());
        fs::write(dir.path().join("a.json"), ctr_json("NCT1")).unwrap();
        fs::write(dir.path().join("b.json"), ctr_json("NCT2")).unwrap();
        let store = load_corpus(dir.path()).unwrap();
        assert_eq!(store.len(), 2);
        assert!(store.warnings().is_empty());
    }

    #[test]
    fn missing_results_defaults_with_warning() {
        let doc = r#"{"Clinical Trial ID": "NCT9", "Intervention": ["x"], "Eligibility": ["y"], "Adverse Events": []}"#;
        let (rec, warnings) = parse_ctr(doc, Path::new("t.json")).unwrap();
        assert!(rec.section(SectionKind::Results).is_empty());
        assert_eq!(rec.section(SectionKind::Intervention), ["x"]);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("Results"));
    }

    #[test]
    fn malformed_and_duplicate_ctrs() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.json"), r#"{"Intervention": []}"#).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::MalformedDocument { .. })));
        fs::write(dir.path().join("a.json"), "{not json").unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::MalformedDocument { .. })));
        fs::write(dir.path().join("a.json"), ctr_json("NCT1")).unwrap();
        fs::write(dir.path().join("b.json"), ctr_json("NCT1")).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::DuplicateCtrId(id)) if id == "NCT1"));
    }

    fn corpus() -> CorpusStore {
        CorpusStore::from_records([
            ClinicalTrialRecord::new("A").with_section(
                SectionKind::Intervention,
                vec!["INTERVENTION 1:".into(), "  Letrozole, Safety.".into()],
            ),
            ClinicalTrialRecord::new("B").with_section(SectionKind::Intervention, vec!["MRI".into()]),
        ])
        .unwrap()
    }

    const SPLIT: &str = r#"{
        "s1": {"Type": "Single", "Section_id": "Intervention", "Primary_id": "A", "Statement": "x", "Label": "Entailment"},
        "c1": {"Section_id": "Intervention", "Primary_id": "A", "Secondary_id": "B", "Statement": "y", "Label": "Contradiction"},
        "s2": {"Section_id": "Results", "Primary_id": "B", "Statement": "z"},
        "c2": {"Type": "Comparison", "Section_id": "Eligibility", "Primary_id": "B", "Secondary_id": "A", "Statement": "w",
               "Intervention": {"Base_id": "s1", "Kind": "Paraphrase"}}
    }"#;

    #[test]
    fn kinds_follow_secondary_presence() {
        let split = parse_split(SPLIT, "t", Path::new("t.json")).unwrap();
        let kinds: Vec<_> = split.instances().iter().map(|i| i.kind()).collect();
        assert_eq!(
            kinds,
            [InstanceKind::Single, InstanceKind::Comparison, InstanceKind::Single, InstanceKind::Comparison]
        );
        let ids: Vec<_> = split.instances().iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["s1", "c1", "s2", "c2"]);
        split.check_refs(&corpus()).unwrap();
    }

    #[test]
    fn dangling_references() {
        let doc = r#"{"s1": {"Section_id": "Results", "Primary_id": "NCT404", "Statement": "x"}}"#;
        let split = parse_split(doc, "t", Path::new("t.json")).unwrap();
        match split.check_refs(&corpus()) {
            Err(CorpusError::DanglingCtrRef { ctr, .. }) => assert_eq!(ctr, "NCT404"),
            other => panic!("{other:?}"),
        }
        let doc = r#"{"s1": {"Section_id": "Results", "Primary_id": "A", "Statement": "x",
                      "Intervention": {"Base_id": "gone", "Kind": "Paraphrase"}}}"#;
        assert!(matches!(
            parse_split(doc, "t", Path::new("t.json")),
            Err(CorpusError::DanglingBaseRef { base, .. }) if base == "gone"
        ));
    }

    #[test]
    fn bad_fields_are_rejected() {
        let doc = r#"{"s1": {"Section_id": "Methods", "Primary_id": "A", "Statement": "x"}}"#;
        assert!(matches!(parse_split(doc, "t", Path::new("t")), Err(CorpusError::UnknownSection(_))));
        let doc = r#"{"s1": {"Section_id": "Results", "Primary_id": "A", "Statement": "x", "Label": "Neutral"}}"#;
        assert!(matches!(parse_split(doc, "t", Path::new("t")), Err(CorpusError::UnknownLabel(_))));
        let doc = r#"{"s1": {"Type": "Comparison", "Section_id": "Results", "Primary_id": "A", "Statement": "x"}}"#;
        assert!(matches!(parse_split(doc, "t", Path::new("t")), Err(CorpusError::KindMismatch { .. })));
        let doc = r#"{"s1": {"Section_id": "Results", "Primary_id": "A", "Statement": "  "}}"#;
        assert!(matches!(parse_split(doc, "t", Path::new("t")), Err(CorpusError::EmptyStatement(_))));
    }

    #[test]
    fn nested_interventions_rejected() {
        let doc = r#"{
            "b": {"Section_id": "Results", "Primary_id": "A", "Statement": "x"},
            "d1": {"Section_id": "Results", "Primary_id": "A", "Statement": "y", "Intervention": {"Base_id": "b", "Kind": "Paraphrase"}},
            "d2": {"Section_id": "Results", "Primary_id": "A", "Statement": "z", "Intervention": {"Base_id": "d1", "Kind": "Paraphrase"}}
        }"#;
        assert!(matches!(parse_split(doc, "t", Path::new("t")), Err(CorpusError::NestedIntervention { .. })));
    }

    #[test]
    fn evidence_resolution() {
        let split = parse_split(SPLIT, "t", Path::new("t.json")).unwrap();
        let c = corpus();
        let single = resolve_evidence(&split.instances()[0], &c).unwrap();
        assert_eq!(single.primary, "INTERVENTION 1:\n• Letrozole, Safety.");
        assert_eq!(single.secondary, None);
        let comparison = resolve_evidence(&split.instances()[1], &c).unwrap();
        assert_eq!(comparison.secondary.as_deref(), Some("• MRI"));
        // Results section of B is empty.
        let empty = resolve_evidence(&split.instances()[2], &c).unwrap();
        assert_eq!(empty.primary, "");
    }

    #[test]
    fn meta_key_is_skipped() {
        let doc = r#"{"_meta": {"seed": 1}, "s1": {"Section_id": "Results", "Primary_id": "A", "Statement": "x"}}"#;
        assert_eq!(parse_split(doc, "t", Path::new("t")).unwrap().len(), 1);
    }
}
