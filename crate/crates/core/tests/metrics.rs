mod common;

use std::collections::BTreeSet;

use kgaug_core::eval::{accuracy, f1, hits_at_1};
use proptest::prelude::*;

fn set(xs: &[u8]) -> BTreeSet<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

#[test]
fn small_cases_by_hand() {
    assert_eq!(f1::<f64>(&set(&[1, 2]), &set(&[2, 3])), 0.5);
    assert_eq!(f1::<f64>(&set(&[1]), &set(&[1, 2, 3])), 0.5);
    assert_eq!(f1::<f64>(&set(&[1, 2, 3]), &set(&[4])), 0.0);
    assert_eq!(f1::<f32>(&set(&[1, 2]), &set(&[1, 2])), 1.0);
}

proptest! {
    #[test]
    fn f1_matches_precision_recall(pred in proptest::collection::btree_set(0u8..12, 0..8), gold in proptest::collection::btree_set(0u8..12, 1..8)) {
        let (p, g) = (set(&pred.iter().copied().collect::<Vec<_>>()), set(&gold.iter().copied().collect::<Vec<_>>()));
        let tp = p.intersection(&g).count() as f64;
        let want = if tp == 0.0 { 0.0 } else {
            let (prec, rec) = (tp / p.len() as f64, tp / g.len() as f64);
            2.0 * prec * rec / (prec + rec)
        };
        let got: f64 = f1(&p, &g);
        prop_assert!((got - want).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
        prop_assert_eq!(got, f1::<f64>(&g, &p));
        let exact: f64 = accuracy(&p, &g);
        prop_assert_eq!(exact == 1.0, p == g);
    }

    #[test]
    fn hit_is_membership_of_the_first(pred in proptest::collection::vec(0u8..6, 0..5), gold in proptest::collection::btree_set(0u8..6, 1..4)) {
        let ordered: Vec<String> = pred.iter().map(|x| x.to_string()).collect();
        let g = set(&gold.iter().copied().collect::<Vec<_>>());
        let h: f64 = hits_at_1(&ordered, &g);
        prop_assert_eq!(h == 1.0, ordered.first().is_some_and(|x| g.contains(x)));
    }
}
