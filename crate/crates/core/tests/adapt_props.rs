use ergopt::adapt::{adapted_metric, telescoping_slacks, verify_oba, OBA_TOL};
use ergopt::cocycle::{jsr_bracket, sigma_n};
use ergopt::matgeo::{act, vdist};
use ergopt::sampling::{near_identity_matrix, random_symbols, rng, uniform_matrix};
use ergopt::{Cocycle, OneStepCocycle, Word};
use proptest::prelude::*;

fn random_cocycle(seed: u64) -> OneStepCocycle {
    let mut r = rng(seed);
    OneStepCocycle::full(vec![uniform_matrix(&mut r, 2, 0.5, 1.5), uniform_matrix(&mut r, 2, 0.5, 1.5)]).unwrap()
}

// Mild anisotropy, so the rounded f64 metrics still resolve the one-step displacement.
fn tame_cocycle(seed: u64) -> OneStepCocycle {
    let mut r = rng(seed);
    OneStepCocycle::full(vec![near_identity_matrix(&mut r, 2, 0.3), near_identity_matrix(&mut r, 2, 0.3)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn certificates_hold(seed in any::<u64>(), k in 1usize..=3) {
        let f = random_cocycle(seed);
        let (rec, c) = adapted_metric(&f, k).unwrap();
        prop_assert!(c.oba_slack >= -OBA_TOL, "oba slack {}", c.oba_slack);
        let mut r = rng(seed ^ 0xabc);
        let sample: Vec<Word> = (0..40).map(|_| Word(random_symbols(&mut r, 2, (1 << k) + 1))).collect();
        prop_assert!(verify_oba(&f, &c, &sample).unwrap() >= -OBA_TOL);
        for s in telescoping_slacks(&f, &rec, &sample).unwrap() {
            prop_assert!(s >= -OBA_TOL, "telescoping slack {}", s);
        }
    }

    #[test]
    fn one_step_data_is_the_metric_displacement(seed in any::<u64>(), k in 1usize..=3) {
        let f = tame_cocycle(seed);
        let (rec, c) = adapted_metric(&f, k).unwrap();
        let phi = rec.phi();
        let direct = sigma_n(&c.g, 1).unwrap();
        for (w, s) in c.windows.iter().zip(&c.sigma1_g) {
            let x = w.symbols();
            let moved = act(f.matrix(x[0]), &phi.get(x)).unwrap();
            let d = vdist(&phi.get(&x[1..]), &moved).unwrap();
            prop_assert!(d.max_abs_diff(&s.scaled(2.0)) < 1e-9, "{} vs 2·{}", d, s);
        }
        let mut a: Vec<_> = direct.iter().map(|v| v.as_slice().to_vec()).collect();
        let mut b: Vec<_> = c.sigma1_g.iter().map(|v| v.as_slice().to_vec()).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-9));
        }
    }

    #[test]
    fn sums_are_window_mean_log_det(seed in any::<u64>(), k in 1usize..=3) {
        let f = random_cocycle(seed);
        let (_, c) = adapted_metric(&f, k).unwrap();
        for (w, s) in c.windows.iter().zip(&c.sigma1_g) {
            let mean = w.symbols().iter().map(|&a| f.log_abs_det(a)).sum::<f64>() / c.n as f64;
            prop_assert!((s.sum() - mean).abs() < 1e-9, "{} vs {}", s.sum(), mean);
        }
    }

    #[test]
    fn conjugation_keeps_periodic_growth(seed in any::<u64>()) {
        let f = random_cocycle(seed);
        let (_, c) = adapted_metric(&f, 2).unwrap();
        prop_assert_eq!(c.g.system().alphabet_size(), 2);
        for depth in 1..=6 {
            let bf = jsr_bracket(&f, depth).unwrap();
            let bg = jsr_bracket(&c.g, depth).unwrap();
            prop_assert!((bf.lower - bg.lower).abs() <= 1e-6 * bf.lower, "{} vs {}", bf.lower, bg.lower);
            prop_assert!(bf.lower <= bg.upper * (1.0 + 1e-9) && bg.lower <= bf.upper * (1.0 + 1e-9));
        }
    }
}
