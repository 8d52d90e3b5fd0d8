use num_traits::{Signed, Zero};
use proptest::prelude::*;
use tauwalk::layering::{strip_transition_weight, StripOperator};
use tauwalk::numeric::Q;
use tauwalk::partition::{is_strip, maya_from_partition, Orientation, Partition};
use tauwalk::random_turn::path_count;
use tauwalk::schur::schur_in_variables;
use tauwalk::vicious::{binomial_determinant, constrained_chain_weight_sites, wick_transition, ChainSpec, ConstraintMode, ConstraintSet, Geometry};
use tauwalk::Potential;

fn partition(max_len: usize, max_part: usize) -> impl Strategy<Value = Partition> {
    prop::collection::vec(0..=max_part, 0..=max_len).prop_map(|mut v| {
        v.sort_unstable_by(|a, b| b.cmp(a));
        Partition::new(v).unwrap()
    })
}

fn decreasing(k: usize, max: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::btree_set(0..=max, k).prop_map(|s| s.into_iter().rev().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugation_is_an_involution(l in partition(6, 6)) {
        prop_assert_eq!(l.conjugate().conjugate(), l.clone());
        prop_assert_eq!(l.conjugate().weight(), l.weight());
    }

    #[test]
    fn maya_round_trip(l in partition(6, 6), level in -3i64..3) {
        let m = maya_from_partition(&l, level, l.len() + 2).unwrap();
        prop_assert_eq!(m.to_partition().unwrap(), l);
    }

    #[test]
    fn path_count_parity_law(l in partition(4, 4), t in 0usize..14) {
        let n = path_count(&l, t);
        if t < l.weight() || (t - l.weight()) % 2 == 1 {
            prop_assert!(n.is_zero());
        } else {
            prop_assert!(!n.is_zero());
        }
    }

    #[test]
    fn strip_weights_are_positive_on_strips(a in partition(4, 4), b in partition(4, 4), sigma in 1u8..=4, x in 0.05f64..2.0) {
        let op = StripOperator::new(sigma, x, Potential::constant_rate(0.7)).unwrap();
        let w = strip_transition_weight(&a, &b, &op);
        let orient = if sigma <= 2 { Orientation::Vertical } else { Orientation::Horizontal };
        let admissible = if sigma % 2 == 1 { is_strip(&a, &b, orient) } else { is_strip(&b, &a, orient) };
        prop_assert_eq!(w > 0.0, admissible);
        prop_assert!(w >= 0.0);
    }

    #[test]
    fn schur_polynomials_are_symmetric(l in partition(3, 3), mut x in prop::collection::vec(1i64..6, 3), swap in 0usize..2) {
        let q: Vec<Q> = x.iter().map(|&v| Q::from_integer(v.into())).collect();
        let before = schur_in_variables(&l, &q);
        x.swap(swap, swap + 1);
        let q: Vec<Q> = x.iter().map(|&v| Q::from_integer(v.into())).collect();
        prop_assert_eq!(schur_in_variables(&l, &q), before);
    }

    #[test]
    fn binomial_determinants_are_nonnegative(a in decreasing(3, 10), b in decreasing(3, 10)) {
        prop_assume!(a.iter().zip(&b).all(|(x, y)| x >= y));
        prop_assert!(!binomial_determinant(&a, &b).unwrap().is_negative());
    }

    #[test]
    fn wick_vanishes_off_containment(lp in partition(3, 4), l in partition(3, 4)) {
        let w = wick_transition(&lp, &l, &Potential::gauss(0.5)).to_f64();
        if !lp.contains(&l) {
            prop_assert_eq!(w, 0.0);
        } else {
            prop_assert!(w > 0.0);
        }
    }

    #[test]
    fn contain_and_avoid_partition_the_weight(start in decreasing(2, 5), end in decreasing(2, 5), pin in decreasing(1, 7), j in 1usize..3) {
        let chain = ChainSpec::uniform(2, 3, Potential::constant_rate(2.0), Geometry::HalfLine);
        let total = constrained_chain_weight_sites(&start, &end, &chain, &ConstraintSet::new()).unwrap();
        let c = constrained_chain_weight_sites(&start, &end, &chain, &ConstraintSet::new().with(j, ConstraintMode::Contain, pin.clone())).unwrap();
        let a = constrained_chain_weight_sites(&start, &end, &chain, &ConstraintSet::new().with(j, ConstraintMode::Avoid, pin)).unwrap();
        prop_assert_eq!(c.exact().unwrap() + a.exact().unwrap(), total.exact().unwrap().clone());
    }
}
