use ergopt::matgeo::{
    act, cartan, geodesic, jordan_with_log_det, log_abs_det, majorization_slack, midpoint, opposition, vdist, MAJORIZATION_TOL,
};
use ergopt::props::run_suites;
use ergopt::sampling::{gaussian_matrix, rng, spd_point};
use ergopt::{ChamberVector, SpdPoint};
use proptest::prelude::*;

fn close(a: &ChamberVector, b: &ChamberVector, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cartan_is_subadditive(seed in any::<u64>(), d in 2usize..=4) {
        let mut r = rng(seed);
        let (g, h) = (gaussian_matrix(&mut r, d), gaussian_matrix(&mut r, d));
        let sum = cartan(&g).unwrap().add(&cartan(&h).unwrap()).unwrap();
        prop_assert!(majorization_slack(cartan(&(&g * &h)).unwrap().as_slice(), sum.as_slice()).unwrap() >= -MAJORIZATION_TOL);
    }

    #[test]
    fn cartan_majorizes_jordan(seed in any::<u64>(), d in 2usize..=3) {
        let g = gaussian_matrix(&mut rng(seed), d);
        let chi = jordan_with_log_det(&g, log_abs_det(&g).unwrap()).unwrap();
        prop_assert!(majorization_slack(chi.as_slice(), cartan(&g).unwrap().as_slice()).unwrap() >= -MAJORIZATION_TOL);
    }

    #[test]
    fn cartan_is_half_jordan_of_gram(seed in any::<u64>(), d in 2usize..=3) {
        let g = gaussian_matrix(&mut rng(seed), d);
        let chi = jordan_with_log_det(&(&g * g.transpose()), 2.0 * log_abs_det(&g).unwrap()).unwrap();
        prop_assert!(close(&cartan(&g).unwrap(), &chi.scaled(0.5), 1e-9));
    }

    #[test]
    fn jordan_is_cyclic(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng(seed);
        let (g, h) = (gaussian_matrix(&mut r, d), gaussian_matrix(&mut r, d));
        let ld = log_abs_det(&g).unwrap() + log_abs_det(&h).unwrap();
        let a = jordan_with_log_det(&(&g * &h), ld).unwrap();
        let b = jordan_with_log_det(&(&h * &g), ld).unwrap();
        prop_assert!(close(&a, &b, 1e-9), "{} vs {}", a, b);
    }

    #[test]
    fn vdist_axioms(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng(seed);
        let (p, q, g) = (spd_point(&mut r, d), spd_point(&mut r, d), gaussian_matrix(&mut r, d));
        let pq = vdist(&p, &q).unwrap();
        prop_assert!(close(&vdist(&SpdPoint::identity(d), &q).unwrap(), &q.log_eigenvalues(), 1e-9));
        prop_assert!(close(&vdist(&act(&g, &p).unwrap(), &act(&g, &q).unwrap()).unwrap(), &pq, 1e-9));
        prop_assert!(close(&vdist(&p, &p).unwrap(), &ChamberVector::zeros(d), 1e-9));
        prop_assert!(close(&vdist(&q, &p).unwrap(), &opposition(&pq), 1e-9));
    }

    #[test]
    fn vdist_triangle(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng(seed);
        let (p, q, s) = (spd_point(&mut r, d), spd_point(&mut r, d), spd_point(&mut r, d));
        let sum = vdist(&p, &q).unwrap().add(&vdist(&q, &s).unwrap()).unwrap();
        prop_assert!(majorization_slack(vdist(&p, &s).unwrap().as_slice(), sum.as_slice()).unwrap() >= -MAJORIZATION_TOL);
    }

    #[test]
    fn geodesic_law(seed in any::<u64>(), d in 2usize..=3, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let (p, q) = (spd_point(&mut r, d), spd_point(&mut r, d));
        let (t, s) = (a.min(b), a.max(b));
        let along = vdist(&geodesic(&p, &q, t).unwrap(), &geodesic(&p, &q, s).unwrap()).unwrap();
        prop_assert!(close(&along, &vdist(&p, &q).unwrap().scaled(s - t), 1e-8));
    }

    #[test]
    fn busemann(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng(seed);
        let (o, p, q) = (spd_point(&mut r, d), spd_point(&mut r, d), spd_point(&mut r, d));
        let lhs = vdist(&midpoint(&o, &p).unwrap(), &midpoint(&o, &q).unwrap()).unwrap();
        let rhs = vdist(&p, &q).unwrap().scaled(0.5);
        prop_assert!(majorization_slack(lhs.as_slice(), rhs.as_slice()).unwrap() >= -MAJORIZATION_TOL);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn seeded_suites_pass(seed in any::<u64>()) {
        let report = run_suites(seed, 250).unwrap();
        prop_assert!(report.pass, "{:?}", report.suites.iter().filter(|s| !s.pass).collect::<Vec<_>>());
    }
}
