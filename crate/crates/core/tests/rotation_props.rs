use std::collections::BTreeMap;

use ergopt::rotation::{default_directions, rotation_approx, rotation_inner, rotation_outer, VectorObservable};
use ergopt::{Observable, SymbolicSystem, Word};
use proptest::prelude::*;

fn table(sys: &SymbolicSystem, window: usize, vals: &[f64]) -> Observable {
    let mut map = BTreeMap::new();
    let mut i = 0;
    sys.for_each_word(window, |s| {
        map.insert(Word(s.to_vec()), vals[i % vals.len()]);
        i += 1;
    })
    .unwrap();
    Observable::table(sys, &map).unwrap()
}

fn vector_strategy() -> impl Strategy<Value = VectorObservable> {
    (
        prop_oneof![
            Just(SymbolicSystem::full_shift(2).unwrap()),
            Just(SymbolicSystem::full_shift(3).unwrap()),
            Just(SymbolicSystem::sft(3, &[[0, 0], [1, 2]]).unwrap()),
        ],
        1usize..=2,
        prop::collection::vec(-1.0f64..1.0, 9),
        prop::collection::vec(-1.0f64..1.0, 9),
    )
        .prop_map(|(sys, w, a, b)| VectorObservable::new(vec![table(&sys, w, &a), table(&sys, w, &b)]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inner_lies_inside_outer(f in vector_strategy(), period in 1usize..6, depth in 1usize..7) {
        let dirs = default_directions(2, 24).unwrap();
        let a = rotation_approx(&f, period, depth, &dirs).unwrap();
        prop_assert!(a.containment_slack() >= -1e-9, "slack {}", a.containment_slack());
        prop_assert!(a.hausdorff_gap >= 0.0);
    }

    #[test]
    fn doubling_the_depth_never_loosens_the_envelope(f in vector_strategy(), depth in 1usize..5) {
        let dirs = default_directions(2, 16).unwrap();
        let coarse = rotation_outer(&f, depth, &dirs).unwrap();
        let fine = rotation_outer(&f, 2 * depth, &dirs).unwrap();
        for (c, g) in coarse.iter().zip(&fine) {
            prop_assert!(g.bound <= c.bound + 1e-12);
        }
    }

    #[test]
    fn inner_hull_is_affine_equivariant(f in vector_strategy(), a in 0.1f64..3.0, flip in any::<bool>(), b0 in -2.0f64..2.0, b1 in -2.0f64..2.0) {
        let a = if flip { -a } else { a };
        let g = f.affine(a, &[b0, b1]).unwrap();
        let base = rotation_inner(&f, 5).unwrap();
        let moved = rotation_inner(&g, 5).unwrap();
        prop_assert_eq!(base.len(), moved.len());
        for v in &base {
            let target = [a * v.point[0] + b0, a * v.point[1] + b1];
            let m = moved.iter().find(|m| (m.point[0] - target[0]).abs() < 1e-9 && (m.point[1] - target[1]).abs() < 1e-9);
            prop_assert!(m.is_some(), "missing image of {:?}", v.point);
            prop_assert_eq!(&m.unwrap().witness, &v.witness);
        }
    }
}
