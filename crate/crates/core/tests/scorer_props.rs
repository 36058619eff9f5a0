//! Scorer invariants and a greedy-simulation oracle.

use proptest::prelude::*;
use slotie_core::eval::wire57::{wire57_matching, wire57_pair};
use slotie_core::eval::{score, Scheme, SentencePair};
use slotie_core::Extraction;

fn part() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "the", "is", "born", "in", "Ulm"]), 1..4).prop_map(|w| w.join(" "))
}

fn extraction() -> impl Strategy<Value = Extraction> {
    (part(), part(), part()).prop_map(|(a, r, b)| Extraction::new(a, r, b))
}

fn set(max: usize) -> impl Strategy<Value = Vec<Extraction>> {
    prop::collection::vec(extraction(), 0..=max)
}

/// Repeatedly scans every remaining pair for the strictly best F1.
fn greedy_simulation(gold: &[Extraction], pred: &[Extraction]) -> Vec<(usize, usize)> {
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gold.len()];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..pred.len() {
            for j in 0..gold.len() {
                if used_p[i] || used_g[j] {
                    continue;
                }
                if let Some(o) = wire57_pair(&pred[i], &gold[j]) {
                    if best.is_none_or(|(f, _, _)| o.f1() > f) {
                        best = Some((o.f1(), i, j));
                    }
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        used_p[i] = true;
        used_g[j] = true;
        out.push((i, j));
    }
    out
}

fn corpus(gold: Vec<Extraction>, pred: Vec<Extraction>) -> Vec<SentencePair> {
    vec![SentencePair { sentence: "s".into(), gold, pred }]
}

proptest! {
    #[test]
    fn wire57_pair_swaps_precision_and_recall(t in extraction(), g in extraction()) {
        let a = wire57_pair(&t, &g);
        let b = wire57_pair(&g, &t);
        prop_assert_eq!(a.is_some(), b.is_some());
        if let (Some(a), Some(b)) = (a, b) {
            prop_assert_eq!(a.precision(), b.recall());
            prop_assert_eq!(a.recall(), b.precision());
        }
    }

    #[test]
    fn greedy_matches_simulation(gold in set(3), pred in set(3)) {
        let got: Vec<(usize, usize)> = wire57_matching(&gold, &pred).iter().map(|(p, _)| (p.pred, p.gold)).collect();
        prop_assert_eq!(got, greedy_simulation(&gold, &pred));
    }

    #[test]
    fn scores_lie_in_unit_interval(gold in set(4), pred in set(4)) {
        for scheme in Scheme::ALL {
            let r = score(scheme, &corpus(gold.clone(), pred.clone()));
            for v in [r.precision, r.recall, r.f1, r.auc.unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v), "{scheme}: {v}");
            }
            if r.precision == 0.0 && r.recall == 0.0 {
                prop_assert_eq!(r.f1, 0.0);
            }
        }
    }

    #[test]
    fn self_score_is_perfect(gold in prop::collection::vec(extraction(), 1..4)) {
        for scheme in Scheme::ALL {
            let r = score(scheme, &corpus(gold.clone(), gold.clone()));
            prop_assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0), "{}", scheme);
        }
    }

    #[test]
    fn duplicate_correct_prediction(gold in prop::collection::vec(extraction(), 1..4), pred in set(3), pick in 0usize..4) {
        let dup = gold[pick % gold.len()].clone();
        let mut more = pred.clone();
        more.push(dup);
        let before = corpus(gold.clone(), pred);
        let after = corpus(gold, more);
        for scheme in Scheme::ALL {
            prop_assert!(score(scheme, &after).recall + 1e-12 >= score(scheme, &before).recall, "{}", scheme);
        }
        let (b, a) = (score(Scheme::Carb11, &before), score(Scheme::Carb11, &after));
        if b.n_pred > 0 && b.precision == 1.0 {
            prop_assert!(a.precision <= b.precision);
        }
    }

    #[test]
    fn order_free_schemes_ignore_prediction_order(gold in set(3), pred in set(3)) {
        let mut rev = pred.clone();
        rev.reverse();
        for scheme in [Scheme::Wire57, Scheme::Carb11] {
            let a = score(scheme, &corpus(gold.clone(), pred.clone()));
            let b = score(scheme, &corpus(gold.clone(), rev.clone()));
            prop_assert!((a.precision - b.precision).abs() < 1e-12 && (a.recall - b.recall).abs() < 1e-12, "{}", scheme);
        }
    }
}

#[test]
fn duplicate_can_raise_one_to_one_precision_below_one() {
    // The duplicate finds a second, similar gold tuple, so the bound only holds at P = 1.
    let g1 = Extraction::new("Einstein", "was born in", "Ulm");
    let g2 = Extraction::new("Einstein", "was born in", "Ulm Germany");
    let junk = Extraction::new("x", "y", "z");
    let before = score(Scheme::Carb11, &corpus(vec![g1.clone(), g2.clone()], vec![g1.clone(), junk.clone()]));
    let after = score(Scheme::Carb11, &corpus(vec![g1.clone(), g2], vec![g1.clone(), junk, g1]));
    assert_eq!(before.precision, 0.5);
    assert!((after.precision - 2.0 / 3.0).abs() < 1e-12);
}
