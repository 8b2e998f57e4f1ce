use std::collections::BTreeMap;

use ergopt::cocycle::{conjugate, jsr_bracket, lyap_vector_periodic, periodic_jordan, product, sigma_n, spectrum_approx};
use ergopt::matgeo::{log_abs_det, majorization_slack};
use ergopt::rotation::default_directions;
use ergopt::sampling::{gaussian_matrix, random_symbols, rng};
use ergopt::symdyn::enumerate_necklaces;
use ergopt::{Cocycle, Mat, OneStepCocycle, SymbolicSystem, ThetaSet, Word};
use proptest::prelude::*;

fn random_cocycle(seed: u64, d: usize, k: usize) -> OneStepCocycle {
    let mut r = rng(seed);
    OneStepCocycle::full((0..k).map(|_| gaussian_matrix(&mut r, d)).collect()).unwrap()
}

/// Every matrix rescaled to `|det| = c`.
fn constant_det_cocycle(seed: u64, d: usize, c: f64) -> OneStepCocycle {
    let mut r = rng(seed);
    let mats: Vec<Mat> = (0..2)
        .map(|_| {
            let g = gaussian_matrix(&mut r, d);
            let ld = log_abs_det(&g).unwrap();
            g * ((c.ln() - ld) / d as f64).exp()
        })
        .collect();
    OneStepCocycle::full(mats).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn products_are_subadditive(seed in any::<u64>(), d in 2usize..=3, n in 1usize..8, m in 1usize..8) {
        let f = random_cocycle(seed, d, 2);
        let mut r = rng(seed ^ 0x5eed);
        let w = random_symbols(&mut r, 2, n);
        let v = random_symbols(&mut r, 2, m);
        let wv: Vec<u8> = w.iter().chain(&v).copied().collect();
        let whole = product(&f, &Word(wv)).unwrap().cartan().unwrap();
        let sum = product(&f, &Word(w)).unwrap().cartan().unwrap().add(&product(&f, &Word(v)).unwrap().cartan().unwrap()).unwrap();
        prop_assert!(majorization_slack(whole.as_slice(), sum.as_slice()).unwrap() >= -1e-9);
    }

    #[test]
    fn jsr_brackets_tighten_with_depth(seed in any::<u64>(), d in 2usize..=3) {
        let f = random_cocycle(seed, d, 2);
        let mut prev: Option<(f64, f64)> = None;
        for depth in 1..=7 {
            let b = jsr_bracket(&f, depth).unwrap();
            prop_assert!(b.lower <= b.upper * (1.0 + 1e-12));
            if let Some((lo, hi)) = prev {
                prop_assert!(b.lower >= lo * (1.0 - 1e-12));
                prop_assert!(b.upper <= hi * (1.0 + 1e-12));
            }
            prev = Some((b.lower, b.upper));
        }
    }

    #[test]
    fn periodic_lyapunov_vectors_lie_inside_the_outer_envelope(seed in any::<u64>(), depth in 1usize..7) {
        let f = random_cocycle(seed, 2, 2);
        let s = spectrum_approx(&f, 6, depth, &ThetaSet::full(2), &default_directions(2, 24).unwrap()).unwrap();
        prop_assert!(s.lplus_slack() >= -1e-6, "slack {}", s.lplus_slack());
        for (i, o) in s.inner.iter().zip(&s.outer) {
            prop_assert!(i.bound <= o.bound + 1e-9);
        }
    }

    #[test]
    fn determinant_is_conserved(seed in any::<u64>(), d in 2usize..=3, c in 0.2f64..5.0, n in 1usize..7) {
        let f = constant_det_cocycle(seed, d, c);
        for v in sigma_n(&f, n).unwrap() {
            prop_assert!((v.sum() / n as f64 - c.ln()).abs() < 1e-9);
        }
        for w in enumerate_necklaces(f.system(), 5).unwrap() {
            prop_assert!((lyap_vector_periodic(&f, &w).unwrap().sum() - c.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn conjugation_preserves_periodic_data(seed in any::<u64>(), d in 2usize..=3) {
        let f = random_cocycle(seed, d, 2);
        let mut r = rng(seed.wrapping_add(1));
        let sys = SymbolicSystem::full_shift(2).unwrap();
        let mut h = BTreeMap::new();
        sys.for_each_word(2, |w| { h.insert(Word(w.to_vec()), gaussian_matrix(&mut r, d)); }).unwrap();
        let g = conjugate(&f, &h, 2).unwrap();
        for w in enumerate_necklaces(&sys, 6).unwrap() {
            let a = periodic_jordan(&f, &w).unwrap();
            let b = periodic_jordan(&g, &w).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-6 * (1.0 + a.as_slice()[0].abs()), "{} vs {}", a, b);
        }
        for depth in 1..=6 {
            let bf = jsr_bracket(&f, depth).unwrap();
            let bg = jsr_bracket(&g, depth).unwrap();
            prop_assert!(bf.lower <= bg.upper * (1.0 + 1e-9) && bg.lower <= bf.upper * (1.0 + 1e-9));
        }
    }

    #[test]
    fn morse_envelope_is_monotone_under_doubling(seed in any::<u64>(), n in 1usize..5) {
        let f = random_cocycle(seed, 2, 2);
        let dirs = default_directions(2, 16).unwrap();
        // Subadditivity is a majorization, so the bound transfers in every
        // direction for the Weyl-symmetric hull and in decreasing directions for any Θ.
        for theta in [ThetaSet::empty(2), ThetaSet::full(2)] {
            let coarse = spectrum_approx(&f, 2, n, &theta, &dirs).unwrap();
            let fine = spectrum_approx(&f, 2, 2 * n, &theta, &dirs).unwrap();
            for (c, g) in coarse.outer.iter().zip(&fine.outer) {
                if theta.is_full() || c.direction[0] >= c.direction[1] {
                    prop_assert!(g.bound <= c.bound + 1e-9, "{:?}: {} > {}", c.direction, g.bound, c.bound);
                }
            }
        }
    }
}
