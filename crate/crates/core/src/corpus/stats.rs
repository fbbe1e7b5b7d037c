use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::{InstanceKind, Label, LabelEffect, Split};

/// Composition counts of a split. Percentages are derived on demand from
/// exact ratios; display rounds to one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SplitStats {
    pub n: u64,
    pub n_single: u64,
    pub n_comparison: u64,
    pub n_labeled: u64,
    pub n_entail: u64,
    pub n_contra: u64,
    pub n_interventions: u64,
    pub n_preserving: u64,
    pub n_altering: u64,
}

fn pct(part: u64, whole: u64) -> Ratio<u64> {
    if whole == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(part * 100, whole)
    }
}

pub(crate) fn ratio_f64(r: Ratio<u64>) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl SplitStats {
    pub fn pct_single(&self) -> Ratio<u64> {
        pct(self.n_single, self.n)
    }
    pub fn pct_comparison(&self) -> Ratio<u64> {
        pct(self.n_comparison, self.n)
    }
    pub fn pct_entail(&self) -> Ratio<u64> {
        pct(self.n_entail, self.n_labeled)
    }
    pub fn pct_contra(&self) -> Ratio<u64> {
        pct(self.n_contra, self.n_labeled)
    }
    /// Share of the split that carries an intervention link.
    pub fn pct_interventions(&self) -> Ratio<u64> {
        pct(self.n_interventions, self.n)
    }
    pub fn pct_preserving(&self) -> Ratio<u64> {
        pct(self.n_preserving, self.n_interventions)
    }
    pub fn pct_altering(&self) -> Ratio<u64> {
        pct(self.n_altering, self.n_interventions)
    }

    pub fn markdown_header() -> &'static str {
        "| Set | # Samples | Single - Compari. | Entail. - Contr. | # Interventions | Preserving - Altering |\n\
         |---|---|---|---|---|---|"
    }

    pub fn markdown_row(&self, name: &str) -> String {
        let d = |r: Ratio<u64>| format!("{:.1}%", ratio_f64(r));
        let labels = if self.n_labeled == 0 {
            "n/a".to_string()
        } else {
            format!("{} - {}", d(self.pct_entail()), d(self.pct_contra()))
        };
        let (interventions, effects) = if self.n_interventions == 0 {
            ("0".to_string(), "n/a".to_string())
        } else {
            (
                format!("{} ({})", self.n_interventions, d(self.pct_interventions())),
                format!("{} - {}", d(self.pct_preserving()), d(self.pct_altering())),
            )
        };
        format!(
            "| {name} | {} | {} - {} | {labels} | {interventions} | {effects} |",
            self.n,
            d(self.pct_single()),
            d(self.pct_comparison()),
        )
    }
}

pub fn split_stats(split: &Split) -> SplitStats {
    let mut s = SplitStats::default();
    for inst in split.instances() {
        s.n += 1;
        match inst.kind() {
            InstanceKind::Single => s.n_single += 1,
            InstanceKind::Comparison => s.n_comparison += 1,
        }
        match inst.gold {
            Some(Label::Entailment) => {
                s.n_labeled += 1;
                s.n_entail += 1;
            }
            Some(Label::Contradiction) => {
                s.n_labeled += 1;
                s.n_contra += 1;
            }
            None => {}
        }
        if let Some(meta) = &inst.intervention {
            s.n_interventions += 1;
            match meta.label_effect() {
                LabelEffect::Preserving => s.n_preserving += 1,
                LabelEffect::Altering => s.n_altering += 1,
            }
        }
    }
    s
}
