//! Exhaustive comparison of the metrics against a naive reference over
//! every prediction assignment of small splits.

mod common;

use common::{check_family, random_split};
use ctr_nli::corpus::Label;
use ctr_nli::metrics::{consistency, faithfulness, Link};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn metrics_match_reference_on_every_assignment() {
    let checked = check_family(2024, 4).unwrap();
    assert_eq!(checked, 4 * 4 * (2 + 4 + 8 + 16 + 32 + 64 + 128 + 256));
}

#[test]
fn metrics_ignore_instance_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let (golds, links) = random_split(&mut rng, 8);
        let preds: Vec<Label> = (0..8).map(|_| if rng.random() { Label::Entailment } else { Label::Contradiction }).collect();
        // Reverse the order and remap link targets accordingly.
        let rev = |i: usize| 7 - i;
        let r_preds: Vec<_> = preds.iter().rev().copied().collect();
        let r_golds: Vec<_> = golds.iter().rev().copied().collect();
        let r_links: Vec<_> = links
            .iter()
            .rev()
            .map(|l| l.map(|l| Link { base: rev(l.base), kind: l.kind }))
            .collect();
        assert_eq!(
            faithfulness(&preds, &golds, &links).unwrap(),
            faithfulness(&r_preds, &r_golds, &r_links).unwrap()
        );
        assert_eq!(consistency(&preds, &links).unwrap(), consistency(&r_preds, &r_links).unwrap());
    }
}
