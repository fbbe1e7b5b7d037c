use std::collections::HashSet;

use num_rational::Ratio;
use serde::Serialize;
use serde_json::Value;

use super::{
    consistency, error_analysis, faithfulness, to_f64, ClassCounts, ConfusionCounts, ErrorBreakdown, Link,
    MetricValue, MetricsError,
};
use crate::corpus::{Label, Split};
use crate::inference::PredictionSet;

pub const FAITHFULNESS_DEFINITION: &str =
    "correct predictions on label-altering interventions whose base instance was predicted correctly";
pub const CONSISTENCY_DEFINITION: &str =
    "label-preserving interventions predicted the same as their base instance, regardless of gold";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: ClassCounts,
}

impl ClassReport {
    fn new(label: Label, counts: ClassCounts) -> Self {
        Self {
            label,
            precision: to_f64(counts.precision()),
            recall: to_f64(counts.recall()),
            f1: to_f64(counts.f1()),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub macro_f1: f64,
    pub macro_f1_exact: String,
    pub faithfulness: MetricValue,
    pub consistency: MetricValue,
    pub per_class: Vec<ClassReport>,
    pub n_scored: usize,
    pub n_base: usize,
    pub n_interventions: usize,
    pub error_breakdown: ErrorBreakdown,
    pub definitions: Definitions,
    #[serde(skip)]
    pub macro_f1_ratio: Ratio<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Definitions {
    pub faithfulness: &'static str,
    pub consistency: &'static str,
}

impl EvalReport {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn markdown_scores_header() -> String {
        "| Run | F1-Score | Faithfulness | Consistency |\n|---|---|---|---|".into()
    }

    /// One row of the scores table, two decimals per metric.
    pub fn markdown_scores_row(&self, run: &str) -> String {
        format!(
            "| {run} | {:.2} | {} | {} |",
            self.macro_f1,
            self.faithfulness.display(),
            self.consistency.display()
        )
    }

    pub fn markdown_errors(&self) -> String {
        let b = &self.error_breakdown;
        let mut lines = vec![
            "| Type of Error | # Occurrences / # Total Samples |".to_string(),
            "|---|---|".to_string(),
        ];
        let mut row = |name: &str, c: &super::ErrorCount| lines.push(format!("| {name} | {} |", c.display()));
        row("Base Statement Errors", &b.base);
        row("Intervention Errors", &b.interventions);
        row("Total Errors", &b.total);
        row("Label Preserving Intervention Errors", &b.preserving);
        row("Label Altering Intervention Errors", &b.altering);
        for (kind, c) in &b.per_kind {
            let name = match kind.as_str() {
                "Paraphrase" => "Paraphrasing Errors",
                "Text_Append" => "Text Appending Errors",
                "Contradiction" => "Contradicting Errors",
                "Numerical_Paraphrase" => "Numerical Paraphrasing Errors",
                _ => "Numerical Contradicting Errors",
            };
            row(name, c);
        }
        lines.join("\n")
    }

    pub fn to_markdown(&self, run: &str) -> String {
        format!(
            "{}\n{}\n\n{}\n",
            Self::markdown_scores_header(),
            self.markdown_scores_row(run),
            self.markdown_errors()
        )
    }
}

/// Scores `predictions` against the golds and intervention links of `split`.
/// The prediction ids must match the split ids exactly.
pub fn full_evaluate(predictions: &PredictionSet, split: &Split) -> Result<EvalReport, MetricsError> {
    if split.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let index = split.index_by_id();
    let mut seen = HashSet::new();
    for (id, _) in predictions.iter() {
        if !index.contains_key(id) {
            return Err(MetricsError::ExtraPrediction(id.to_string()));
        }
        seen.insert(id);
    }
    let mut preds = Vec::with_capacity(split.len());
    let mut golds = Vec::with_capacity(split.len());
    let mut links = Vec::with_capacity(split.len());
    for inst in split.instances() {
        let pred = predictions
            .get(&inst.id)
            .ok_or_else(|| MetricsError::MissingPrediction(inst.id.clone()))?;
        let gold = inst.gold.ok_or_else(|| MetricsError::UnlabeledInstance(inst.id.clone()))?;
        let link = match &inst.intervention {
            None => None,
            Some(meta) => {
                let base = index
                    .get(meta.base_id.as_str())
                    .copied()
                    .filter(|&b| split.instances()[b].is_base())
                    .ok_or_else(|| MetricsError::DanglingLink {
                        instance: inst.id.clone(),
                        base: meta.base_id.clone(),
                    })?;
                Some(Link { base, kind: meta.kind })
            }
        };
        preds.push(pred);
        golds.push(gold);
        links.push(link);
    }

    let confusion = ConfusionCounts::from_pairs(preds.iter().copied().zip(golds.iter().copied()));
    let macro_f1 = confusion.macro_f1();
    let n_interventions = links.iter().filter(|l| l.is_some()).count();
    Ok(EvalReport {
        macro_f1: to_f64(macro_f1),
        macro_f1_exact: macro_f1.to_string(),
        faithfulness: faithfulness(&preds, &golds, &links)?,
        consistency: consistency(&preds, &links)?,
        per_class: [Label::Entailment, Label::Contradiction]
            .into_iter()
            .map(|l| ClassReport::new(l, *confusion.class(l)))
            .collect(),
        n_scored: preds.len(),
        n_base: preds.len() - n_interventions,
        n_interventions,
        error_breakdown: error_analysis(&preds, &golds, &links)?,
        definitions: Definitions {
            faithfulness: FAITHFULNESS_DEFINITION,
            consistency: CONSISTENCY_DEFINITION,
        },
        macro_f1_ratio: macro_f1,
    })
}
