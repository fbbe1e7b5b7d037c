//! Brute-force metric reference shared by the oracle and acceptance targets.

#![allow(dead_code)]

use ctr_nli::corpus::{InterventionKind, Label};
use ctr_nli::metrics::{consistency, error_analysis, faithfulness, macro_f1, Link, MetricValue};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reduced fraction with a 0/0 → 0 convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac(pub u64, pub u64);

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    pub fn new(n: u64, d: u64) -> Frac {
        if n == 0 || d == 0 {
            return Frac(0, 1);
        }
        let g = gcd(n, d);
        Frac(n / g, d / g)
    }
    fn add(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }
    fn mul(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.0, self.1 * o.1)
    }
    fn div(self, o: Frac) -> Frac {
        if o.0 == 0 {
            return Frac(0, 1);
        }
        Frac::new(self.0 * o.1, self.1 * o.0)
    }
    pub fn ratio(self) -> Ratio<u64> {
        Ratio::new(self.0, self.1)
    }
}

pub fn reference_f1(preds: &[Label], golds: &[Label]) -> Frac {
    let mut total = Frac(0, 1);
    for class in [Label::Entailment, Label::Contradiction] {
        let pairs = preds.iter().zip(golds);
        let tp = pairs.clone().filter(|(p, g)| **p == class && **g == class).count() as u64;
        let predicted = preds.iter().filter(|p| **p == class).count() as u64;
        let actual = golds.iter().filter(|g| **g == class).count() as u64;
        let precision = Frac::new(tp, predicted);
        let recall = Frac::new(tp, actual);
        let f1 = Frac(2, 1).mul(precision).mul(recall).div(precision.add(recall));
        total = total.add(f1);
    }
    total.mul(Frac(1, 2))
}

pub fn altering(kind: InterventionKind) -> bool {
    matches!(kind, InterventionKind::Contradiction | InterventionKind::NumericalContradiction)
}

/// Faithfulness phrased as "the prediction changed away from a correct base".
pub fn reference_faithfulness(preds: &[Label], golds: &[Label], links: &[Option<Link>]) -> Option<Frac> {
    let eligible: Vec<(usize, usize)> = links
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.filter(|l| altering(l.kind) && preds[l.base] == golds[l.base]).map(|l| (i, l.base)))
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let changed = eligible.iter().filter(|(i, b)| preds[*i] != preds[*b]).count() as u64;
    Some(Frac::new(changed, eligible.len() as u64))
}

pub fn reference_consistency(preds: &[Label], links: &[Option<Link>]) -> Option<Frac> {
    let eligible: Vec<(usize, usize)> = links
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.filter(|l| !altering(l.kind)).map(|l| (i, l.base)))
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let same = eligible.iter().filter(|(i, b)| preds[*i] == preds[*b]).count() as u64;
    Some(Frac::new(same, eligible.len() as u64))
}

pub fn flip(l: Label) -> Label {
    match l {
        Label::Entailment => Label::Contradiction,
        Label::Contradiction => Label::Entailment,
    }
}

/// A random split shape: some bases, each later instance linked to a base.
pub fn random_split(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Label>, Vec<Option<Link>>) {
    let n_base = rng.random_range(1..=n);
    let mut golds = Vec::with_capacity(n);
    let mut links = Vec::with_capacity(n);
    for _ in 0..n_base {
        golds.push(if rng.random() { Label::Entailment } else { Label::Contradiction });
        links.push(None);
    }
    for _ in n_base..n {
        let base = rng.random_range(0..n_base);
        let kind = InterventionKind::ALL[rng.random_range(0..InterventionKind::ALL.len())];
        golds.push(if altering(kind) { flip(golds[base]) } else { golds[base] });
        links.push(Some(Link { base, kind }));
    }
    (golds, links)
}

pub fn as_frac(v: MetricValue) -> Option<Frac> {
    v.value().map(|r| Frac::new(*r.numer(), *r.denom()))
}

/// Split shape families: only bases, bases with only label-preserving
/// interventions, bases with only label-altering ones, and mixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    BaseOnly,
    PreservingOnly,
    AlteringOnly,
    Mixed,
}

pub fn family_split(rng: &mut ChaCha8Rng, n: usize, family: Family) -> (Vec<Label>, Vec<Option<Link>>) {
    use InterventionKind as K;
    let kinds: &[InterventionKind] = match family {
        Family::BaseOnly => return random_split_with(rng, n, n, &K::ALL),
        Family::PreservingOnly => &[K::Paraphrase, K::TextAppend, K::NumericalParaphrase],
        Family::AlteringOnly => &[K::Contradiction, K::NumericalContradiction],
        Family::Mixed => &K::ALL,
    };
    let n_base = if n == 1 { 1 } else { rng.random_range(1..n) };
    random_split_with(rng, n, n_base, kinds)
}

fn random_split_with(
    rng: &mut ChaCha8Rng,
    n: usize,
    n_base: usize,
    kinds: &[InterventionKind],
) -> (Vec<Label>, Vec<Option<Link>>) {
    let mut golds = Vec::with_capacity(n);
    let mut links = Vec::with_capacity(n);
    for _ in 0..n_base {
        golds.push(if rng.random() { Label::Entailment } else { Label::Contradiction });
        links.push(None);
    }
    for _ in n_base..n {
        let base = rng.random_range(0..n_base);
        let kind = kinds[rng.random_range(0..kinds.len())];
        golds.push(if altering(kind) { flip(golds[base]) } else { golds[base] });
        links.push(Some(Link { base, kind }));
    }
    (golds, links)
}

/// Checks every prediction assignment of one split; returns the number checked.
pub fn check_exhaustive(golds: &[Label], links: &[Option<Link>]) -> Result<u64, String> {
    let n = golds.len();
    let mut checked = 0;
    for mask in 0u32..(1 << n) {
        let preds: Vec<Label> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { Label::Entailment } else { Label::Contradiction })
            .collect();
        let ctx = || format!("golds {golds:?} links {links:?} preds {preds:?}");
        if macro_f1(&preds, golds).map_err(|e| e.to_string())? != reference_f1(&preds, golds).ratio() {
            return Err(format!("macro F1 differs: {}", ctx()));
        }
        if as_frac(faithfulness(&preds, golds, links).map_err(|e| e.to_string())?)
            != reference_faithfulness(&preds, golds, links)
        {
            return Err(format!("faithfulness differs: {}", ctx()));
        }
        if as_frac(consistency(&preds, links).map_err(|e| e.to_string())?) != reference_consistency(&preds, links) {
            return Err(format!("consistency differs: {}", ctx()));
        }
        let b = error_analysis(&preds, golds, links).map_err(|e| e.to_string())?;
        let wrong = |i: &usize| preds[*i] != golds[*i];
        let errors = (0..n).filter(wrong).count() as u64;
        let base_errors = (0..n).filter(|i| links[*i].is_none()).filter(wrong).count() as u64;
        if b.total.count != errors || b.base.count != base_errors || b.interventions.count != errors - base_errors {
            return Err(format!("error counts differ: {}", ctx()));
        }
        b.check_identities()?;
        checked += 1;
    }
    Ok(checked)
}

/// Runs the whole family for sizes 1..=8; returns the number of assignments checked.
pub fn check_family(seed: u64, per_size: usize) -> Result<u64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for n in 1..=8usize {
        for family in [Family::BaseOnly, Family::PreservingOnly, Family::AlteringOnly, Family::Mixed] {
            for _ in 0..per_size {
                let (golds, links) = family_split(&mut rng, n, family);
                checked += check_exhaustive(&golds, &links)?;
            }
        }
    }
    Ok(checked)
}
