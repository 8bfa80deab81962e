//! Randomized invariant checks for the formula normalizer, the ordering
//! closure, the temporal network, and number rendering.

use num_rational::Rational64;
use pocl_core::pddl::{is_nnf, rational_to_string, to_nnf, Formula, Literal};
use pocl_core::plan::BitOrdering;
use pocl_core::stn::{Bound, DGraph};
use pocl_core::validate::parse_number;
use proptest::prelude::*;

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = (0u32..4, any::<bool>())
        .prop_map(|(pred, positive)| Formula::Lit(Literal::new(pred, Vec::new(), positive)));
    leaf.prop_recursive(4, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Formula::And),
            prop::collection::vec(inner, 0..3).prop_map(Formula::Or),
        ]
    })
}

fn eval(f: &Formula, assignment: &[bool; 4]) -> bool {
    match f {
        Formula::Lit(l) => assignment[l.pred as usize] == l.positive,
        Formula::Not(inner) => !eval(inner, assignment),
        Formula::And(cs) => cs.iter().all(|c| eval(c, assignment)),
        Formula::Or(ds) => ds.iter().any(|d| eval(d, assignment)),
        _ => unreachable!("no quantifiers are generated"),
    }
}

proptest! {
    #[test]
    fn normalization_is_idempotent_and_truth_preserving(f in formula()) {
        let n = to_nnf(&f);
        prop_assert!(is_nnf(&n), "negation still nested in {n:?}");
        prop_assert_eq!(&to_nnf(&n), &n);
        for bits in 0..16u32 {
            let assignment = [bits & 1 == 1, bits & 2 == 2, bits & 4 == 4, bits & 8 == 8];
            prop_assert_eq!(eval(&f, &assignment), eval(&n, &assignment));
        }
    }

    #[test]
    fn ordering_closure_stays_a_strict_partial_order(
        attempts in prop::collection::vec((2u32..12, 2u32..12), 0..40),
    ) {
        let mut ord = BitOrdering::new();
        for _ in 0..10 {
            ord.add_step();
        }
        for (a, b) in attempts {
            let accepted = ord.order(a, b).is_ok();
            prop_assert_eq!(accepted, a != b && !ord.precedes(b, a));
            if accepted {
                prop_assert!(ord.precedes(a, b));
            }
        }
        for a in 2..12u32 {
            prop_assert!(!ord.precedes(a, a));
            for b in 2..12u32 {
                prop_assert!(!(ord.precedes(a, b) && ord.precedes(b, a)));
                for c in 2..12u32 {
                    if ord.precedes(a, b) && ord.precedes(b, c) {
                        prop_assert!(ord.precedes(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn tightening_never_loosens_a_bound(
        ops in prop::collection::vec((0usize..7, 0usize..7, -4i64..10), 0..25),
    ) {
        let mut g = DGraph::new(Rational64::from_integer(1));
        for _ in 0..3 {
            g.add_action(&[]).unwrap();
        }
        let n = g.num_points();
        for (i, j, w) in ops {
            let before: Vec<Bound> =
                (0..n * n).map(|k| g.bound(k / n, k % n)).collect();
            let accepted = g.tighten(i, j, Bound::fin(w)).is_ok();
            for k in 0..n * n {
                let after = g.bound(k / n, k % n);
                if accepted {
                    prop_assert!(after <= before[k]);
                } else {
                    prop_assert_eq!(after, before[k]);
                }
            }
        }
        for i in 0..n {
            prop_assert_eq!(g.bound(i, i), Bound::fin(0));
        }
    }

    #[test]
    fn number_rendering_round_trips(numer in -9999i64..10000, denom in 1i64..500) {
        let r = Rational64::new(numer, denom);
        prop_assert_eq!(parse_number(&rational_to_string(r)), Some(r));
    }
}
