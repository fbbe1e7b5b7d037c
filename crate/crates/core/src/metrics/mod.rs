//! Macro F1, faithfulness, consistency and the intervention error breakdown.
//!
//! All arithmetic is done on exact `Ratio<u64>` values; floats only appear in
//! serialized reports.

mod report;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{InterventionKind, Label, LabelEffect};

pub use report::{full_evaluate, ClassReport, EvalReport, FAITHFULNESS_DEFINITION, CONSISTENCY_DEFINITION};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("nothing to score")]
    EmptyInput,
    #[error("instance {0} has no gold label")]
    UnlabeledInstance(String),
    #[error("no prediction for instance {0}")]
    MissingPrediction(String),
    #[error("prediction for unknown instance {0}")]
    ExtraPrediction(String),
    #[error("instance {instance} links to missing or non-base instance {base}")]
    DanglingLink { instance: String, base: String },
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

/// `n / d`, or zero when `d` is zero.
pub fn ratio(n: u64, d: u64) -> Ratio<u64> {
    if d == 0 {
        Ratio::zero()
    } else {
        Ratio::new(n, d)
    }
}

pub fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Intervention edge from a derived instance to its base, by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub base: usize,
    pub kind: InterventionKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    pub fn precision(&self) -> Ratio<u64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Ratio<u64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; zero when both are zero.
    pub fn f1(&self) -> Ratio<u64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub entailment: ClassCounts,
    pub contradiction: ClassCounts,
    pub n: u64,
}

impl ConfusionCounts {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Self::default();
        for (pred, gold) in pairs {
            c.n += 1;
            if pred == gold {
                c.class_mut(gold).tp += 1;
            } else {
                c.class_mut(pred).fp += 1;
                c.class_mut(gold).fn_ += 1;
            }
        }
        c
    }

    pub fn class(&self, label: Label) -> &ClassCounts {
        match label {
            Label::Entailment => &self.entailment,
            Label::Contradiction => &self.contradiction,
        }
    }

    fn class_mut(&mut self, label: Label) -> &mut ClassCounts {
        match label {
            Label::Entailment => &mut self.entailment,
            Label::Contradiction => &mut self.contradiction,
        }
    }

    pub fn macro_f1(&self) -> Ratio<u64> {
        (self.entailment.f1() + self.contradiction.f1()) / 2
    }
}

/// A metric that may have an empty eligible set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricValue {
    Defined(Ratio<u64>),
    Undefined { reason: String },
}

impl MetricValue {
    pub fn value(&self) -> Option<Ratio<u64>> {
        match self {
            MetricValue::Defined(r) => Some(*r),
            MetricValue::Undefined { .. } => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.value().map(to_f64)
    }

    /// Two decimals, or `n/a`.
    pub fn display(&self) -> String {
        match self.as_f64() {
            Some(v) => format!("{v:.2}"),
            None => "n/a".into(),
        }
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(2))?;
        match self {
            MetricValue::Defined(r) => {
                m.serialize_entry("value", &to_f64(*r))?;
                m.serialize_entry("exact", &r.to_string())?;
            }
            MetricValue::Undefined { reason } => {
                m.serialize_entry("value", &Option::<f64>::None)?;
                m.serialize_entry("reason", reason)?;
            }
        }
        m.end()
    }
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<(), MetricsError> {
    if got != expected {
        return Err(MetricsError::LengthMismatch { what, got, expected });
    }
    Ok(())
}

fn check_links(links: &[Option<Link>]) -> Result<(), MetricsError> {
    for (i, link) in links.iter().enumerate() {
        if let Some(l) = link {
            if l.base >= links.len() || links[l.base].is_some() {
                return Err(MetricsError::DanglingLink {
                    instance: format!("#{i}"),
                    base: format!("#{}", l.base),
                });
            }
        }
    }
    Ok(())
}

pub fn confusion(preds: &[Label], golds: &[Label]) -> Result<ConfusionCounts, MetricsError> {
    check_len("golds", golds.len(), preds.len())?;
    Ok(ConfusionCounts::from_pairs(preds.iter().copied().zip(golds.iter().copied())))
}

pub fn macro_f1(preds: &[Label], golds: &[Label]) -> Result<Ratio<u64>, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(confusion(preds, golds)?.macro_f1())
}

/// Share of label-altering interventions predicted correctly, among those
/// whose base was predicted correctly.
pub fn faithfulness(preds: &[Label], golds: &[Label], links: &[Option<Link>]) -> Result<MetricValue, MetricsError> {
    check_len("golds", golds.len(), preds.len())?;
    check_len("links", links.len(), preds.len())?;
    check_links(links)?;
    let (mut eligible, mut hits) = (0, 0);
    for (i, link) in links.iter().enumerate() {
        let Some(l) = link else { continue };
        if l.kind.label_effect() != LabelEffect::Altering || preds[l.base] != golds[l.base] {
            continue;
        }
        eligible += 1;
        hits += u64::from(preds[i] == golds[i]);
    }
    Ok(if eligible == 0 {
        MetricValue::Undefined {
            reason: "no label-altering intervention has a correctly predicted base".into(),
        }
    } else {
        MetricValue::Defined(Ratio::new(hits, eligible))
    })
}

/// Share of label-preserving interventions predicted like their base.
pub fn consistency(preds: &[Label], links: &[Option<Link>]) -> Result<MetricValue, MetricsError> {
    check_len("links", links.len(), preds.len())?;
    check_links(links)?;
    let (mut eligible, mut hits) = (0, 0);
    for (i, link) in links.iter().enumerate() {
        let Some(l) = link else { continue };
        if l.kind.label_effect() != LabelEffect::Preserving {
            continue;
        }
        eligible += 1;
        hits += u64::from(preds[i] == preds[l.base]);
    }
    Ok(if eligible == 0 {
        MetricValue::Undefined {
            reason: "no label-preserving interventions".into(),
        }
    } else {
        MetricValue::Defined(Ratio::new(hits, eligible))
    })
}

/// `count` errors among `total` instances of a category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCount {
    pub count: u64,
    pub total: u64,
}

impl ErrorCount {
    pub fn rate(&self) -> Ratio<u64> {
        ratio(self.count, self.total)
    }

    /// `99 / 500 (19.8%)`
    pub fn display(&self) -> String {
        format!("{} / {} ({:.1}%)", self.count, self.total, 100.0 * to_f64(self.rate()))
    }
}

impl Serialize for ErrorCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("count", &self.count)?;
        m.serialize_entry("total", &self.total)?;
        m.serialize_entry("rate", &to_f64(self.rate()))?;
        m.end()
    }
}

/// Errors partitioned by instance type. Preserving and altering counts are
/// shares of all intervention errors; every other entry is over the
/// instances of its own category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBreakdown {
    pub base: ErrorCount,
    pub interventions: ErrorCount,
    pub total: ErrorCount,
    pub preserving: ErrorCount,
    pub altering: ErrorCount,
    #[serde(serialize_with = "kinds_as_map")]
    pub per_kind: Vec<(InterventionKind, ErrorCount)>,
}

fn kinds_as_map<S: Serializer>(kinds: &[(InterventionKind, ErrorCount)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(kinds.iter().map(|(k, c)| (k.as_str(), c)))
}

impl ErrorBreakdown {
    pub fn kind(&self, kind: InterventionKind) -> ErrorCount {
        self.per_kind
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, c)| *c)
            .unwrap_or_default()
    }

    /// The partition identities every breakdown satisfies.
    pub fn check_identities(&self) -> Result<(), String> {
        let per_kind: u64 = self.per_kind.iter().map(|(_, c)| c.count).sum();
        let per_kind_total: u64 = self.per_kind.iter().map(|(_, c)| c.total).sum();
        let checks = [
            ("base + interventions = total", self.base.count + self.interventions.count == self.total.count),
            ("instance totals add up", self.base.total + self.interventions.total == self.total.total),
            ("per-kind errors add up", per_kind == self.interventions.count),
            ("per-kind totals add up", per_kind_total == self.interventions.total),
            (
                "preserving + altering = interventions",
                self.preserving.count + self.altering.count == self.interventions.count,
            ),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(format!("error breakdown violates {name}")),
            None => Ok(()),
        }
    }
}

pub fn error_analysis(
    preds: &[Label],
    golds: &[Label],
    links: &[Option<Link>],
) -> Result<ErrorBreakdown, MetricsError> {
    check_len("golds", golds.len(), preds.len())?;
    check_len("links", links.len(), preds.len())?;
    let mut base = ErrorCount::default();
    let mut kinds: Vec<(InterventionKind, ErrorCount)> =
        InterventionKind::ALL.iter().map(|k| (*k, ErrorCount::default())).collect();
    let (mut preserving, mut altering) = (0, 0);
    for i in 0..preds.len() {
        let wrong = u64::from(preds[i] != golds[i]);
        match links[i] {
            None => {
                base.total += 1;
                base.count += wrong;
            }
            Some(l) => {
                let slot = &mut kinds.iter_mut().find(|(k, _)| *k == l.kind).expect("every kind listed").1;
                slot.total += 1;
                slot.count += wrong;
                match l.kind.label_effect() {
                    LabelEffect::Preserving => preserving += wrong,
                    LabelEffect::Altering => altering += wrong,
                }
            }
        }
    }
    let interventions = ErrorCount {
        count: kinds.iter().map(|(_, c)| c.count).sum(),
        total: kinds.iter().map(|(_, c)| c.total).sum(),
    };
    let breakdown = ErrorBreakdown {
        base,
        interventions,
        total: ErrorCount {
            count: base.count + interventions.count,
            total: base.total + interventions.total,
        },
        preserving: ErrorCount {
            count: preserving,
            total: interventions.count,
        },
        altering: ErrorCount {
            count: altering,
            total: interventions.count,
        },
        per_kind: kinds,
    };
    if let Err(e) = breakdown.check_identities() {
        panic!("{e}");
    }
    Ok(breakdown)
}
