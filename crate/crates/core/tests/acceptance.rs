//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs every configuration twice; the second pass only feeds the
//! determinism check.

use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use ergopt::adapt::{adapt_report, adapted_metric, conjugated_cocycle, midpoint_recursion, one_step_domination_check, AdaptConfig};
use ergopt::birkhoff::beta_bracket;
use ergopt::cocycle::{
    domination_report, jsr_bracket, lyap_vector_periodic, product, spectrum_approx, Verdict, DEFAULT_DOMINATION_DEPTHS,
    DEFAULT_KAPPA,
};
use ergopt::props::run_suites;
use ergopt::rotation::{default_directions, fish_approx, homoclinic_sum};
use ergopt::sampling::{rng, uniform_matrix};
use ergopt::{Mat, Necklace, Observable, OneStepCocycle, Word};
use serde::Serialize;

struct Outcome {
    pass: bool,
    detail: String,
    elapsed: Duration,
    json: String,
}

fn doc<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn timed(f: impl FnOnce() -> (bool, String, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail, json) = f();
    Outcome { pass, detail, elapsed: t.elapsed(), json }
}

fn m2(a: f64, b: f64, c: f64, d: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[a, b, c, d])
}

fn birkhoff_bracket() -> Outcome {
    timed(|| {
        let b = beta_bracket(&Observable::cos_angle(), 8, 12).unwrap();
        let pass = b.lower == 1.0 && b.lower_witness.to_string() == "0" && b.upper - 1.0 <= 0.05;
        (pass, format!("lower {} witness {} upper-1 {:.3e}", b.lower, b.lower_witness, b.upper - 1.0), doc(&b))
    })
}

/// `max ρ(P)^{1/n}` over every product of length `1..=depth`, with the
/// spectral radius of a 2×2 matrix from its trace and determinant.
fn brute_force_lower(mats: &[Mat], depth: usize) -> f64 {
    fn rho(p: &Mat) -> f64 {
        let (t, d) = (p[(0, 0)] + p[(1, 1)], p.determinant());
        let disc = t * t - 4.0 * d;
        if disc >= 0.0 { (t.abs() + disc.sqrt()) / 2.0 } else { d.abs().sqrt() }
    }
    let mut best = 0.0f64;
    let mut level = vec![Mat::identity(2, 2)];
    for n in 1..=depth {
        level = level.iter().flat_map(|p| mats.iter().map(move |a| a * p)).collect();
        best = best.max(level.iter().map(|p| rho(p).powf(1.0 / n as f64)).fold(0.0, f64::max));
    }
    best
}

fn jsr_oracle() -> Outcome {
    timed(|| {
        let mats = vec![m2(1.0, 1.0, 0.0, 1.0), m2(1.0, 0.0, 1.0, 1.0)];
        let f = OneStepCocycle::full(mats.clone()).unwrap();
        let b = jsr_bracket(&f, 12).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let oracle = brute_force_lower(&mats, 12);
        let pass = b.lower <= phi + 1e-12
            && phi <= b.upper + 1e-12
            && b.upper - b.lower <= 1e-3
            && b.witness.to_string() == "01"
            && (b.lower - oracle).abs() <= 1e-12 * oracle;
        (pass, format!("[{:.10}, {:.10}] width {:.2e} witness {} brute force {:.12}", b.lower, b.upper, b.upper - b.lower, b.witness, oracle), doc(&b))
    })
}

fn fish_reproduction() -> Outcome {
    timed(|| {
        let runs: Vec<_> = [8, 10, 12].iter().map(|&depth| fish_approx(8, depth).unwrap()).collect();
        let top = &runs[2];
        let sturmian = top.inner.iter().all(|v| v.sturmian == Some(true));
        let slack = top.containment_slack();
        let gaps: Vec<f64> = runs.iter().map(|r| r.hausdorff_gap).collect();
        let pass = sturmian && slack >= -1e-9 && gaps[0] > gaps[1] && gaps[1] > gaps[2];
        (pass, format!("{} vertices sturmian {sturmian} slack {slack:.2e} gaps {gaps:.4?}", top.inner.len()), doc(&runs))
    })
}

fn homoclinic() -> Outcome {
    timed(|| {
        let c = homoclinic_sum(30).unwrap();
        let (s1, s2) = (homoclinic_sum(1).unwrap().sum(), homoclinic_sum(2).unwrap().sum());
        let partial = (s1.re + 2.0).abs() < 1e-12 && s1.im.abs() < 1e-12 && (s2.re + 3.0).abs() < 1e-12 && (s2.im - 1.0).abs() < 1e-12;
        let pass = c.im > c.tail && partial;
        (pass, format!("im {:.6} tail {:.2e} S1 {s1:.3} S2 {s2:.3}", c.im, c.tail), doc(&c))
    })
}

fn matgeo_props() -> Outcome {
    timed(|| {
        let r = run_suites(7, 1000).unwrap();
        let worst = r.suites.iter().map(|s| s.worst_margin).fold(f64::INFINITY, f64::min);
        let failed: Vec<&str> = r.suites.iter().filter(|s| !s.pass).map(|s| s.name.as_str()).collect();
        (r.pass, format!("{} suites x 1000, worst margin {worst:.2e}, failed {failed:?}", r.suites.len()), doc(&r))
    })
}

fn domination_and_spectra() -> Outcome {
    timed(|| {
        let f = OneStepCocycle::full(vec![m2(2.0, 0.0, 0.0, 0.5), m2(3.0, 0.0, 0.0, 1.0 / 3.0)]).unwrap();
        let r = domination_report(&f, &DEFAULT_DOMINATION_DEPTHS, DEFAULT_KAPPA).unwrap();
        let rate = r.rates[0].iter().copied().fold(f64::INFINITY, f64::min);
        let s = spectrum_approx(&f, 6, 12, &r.theta, &default_directions(2, 64).unwrap()).unwrap();
        let first = |v: &ergopt::ChamberVector| v.as_slice()[0];
        let lo = s.lplus.iter().map(|(v, _)| v).min_by(|a, b| first(a).total_cmp(&first(b))).unwrap();
        let hi = s.lplus.iter().map(|(v, _)| v).max_by(|a, b| first(a).total_cmp(&first(b))).unwrap();
        let (l2, l3) = (LN_2, 3f64.ln());
        let ends = (lo.as_slice()[0] - l2).abs().max((lo.as_slice()[1] + l2).abs()).max((hi.as_slice()[0] - l3).abs()).max((hi.as_slice()[1] + l3).abs());
        let pass = r.verdict(1) == Some(Verdict::Dominated) && rate >= 2.0 * LN_2 - 1e-12 && ends <= 1e-9 && s.gap <= 0.05;
        (pass, format!("verdict {:?} rate {rate:.6} endpoint error {ends:.1e} outer gap {:.4}", r.verdicts[0], s.gap), doc(&(r, s)))
    })
}

/// `Σ₁(G)` for a one-letter cocycle, checked against `χ(A)`. When `A` is
/// normal the point is exact; otherwise `χ(A) ≼ σ(G) ≼ (1/N) σ(A^N)` bounds
/// the error.
fn single_matrix_error(a: Mat, k: usize) -> (f64, f64) {
    let f = OneStepCocycle::full(vec![a]).unwrap();
    let c = conjugated_cocycle(&f, &midpoint_recursion(&f, k).unwrap()).unwrap();
    assert_eq!(c.sigma1_g.len(), 1);
    let chi = lyap_vector_periodic(&f, &Necklace::new(Word::from("0")).unwrap()).unwrap();
    let n = 1usize << k;
    let bound = product(&f, &Word(vec![0; n])).unwrap().cartan().unwrap().scaled(1.0 / n as f64).max_abs_diff(&chi);
    (c.sigma1_g[0].max_abs_diff(&chi), bound)
}

fn adapted_metric_end_to_end() -> Outcome {
    timed(|| {
        let mut notes = Vec::new();
        let mut pass = true;
        let id = OneStepCocycle::identity(2, 2).unwrap();
        let c = conjugated_cocycle(&id, &midpoint_recursion(&id, 3).unwrap()).unwrap();
        let id_err = c.sigma1_g.iter().flat_map(|v| v.as_slice().to_vec()).fold(0.0f64, |m, x| m.max(x.abs()));
        pass &= id_err <= 1e-12;
        notes.push(format!("identity {id_err:.1e}"));
        for (name, a, exact) in [
            ("diag", m2(2.0, 0.0, 0.0, 0.5), true),
            ("symmetric", m2(2.0, 1.0, 1.0, 1.0), true),
            ("upper", m2(2.0, 1.0, 0.0, 0.5), false),
        ] {
            let (err, bound) = single_matrix_error(a, 3);
            pass &= if exact { err <= 1e-12 } else { err <= bound + 1e-12 };
            notes.push(format!("{name} {err:.1e}"));
        }

        let mut r = rng(7);
        let f = OneStepCocycle::full(vec![uniform_matrix(&mut r, 2, 0.5, 1.5), uniform_matrix(&mut r, 2, 0.5, 1.5)]).unwrap();
        let mut docs = Vec::new();
        let mut eps = Vec::new();
        for k in [3, 4] {
            let rep = adapt_report(&f, &AdaptConfig { seed: 7, ..AdaptConfig::new(k) }).unwrap();
            let tel = rep.telescoping_worst_slack.iter().copied().fold(f64::INFINITY, f64::min);
            pass &= rep.oba_worst_slack >= -1e-8 && tel >= -1e-8;
            notes.push(format!("k={k} oba {:.1e} telescoping {tel:.1e} eps {:.4e}", rep.oba_worst_slack, rep.inclusion.achieved_epsilon));
            eps.push(rep.inclusion.achieved_epsilon);
            docs.push(doc(&rep));
        }
        pass &= eps[1] <= eps[0];
        (pass, notes.join(", "), docs.join("\n"))
    })
}

fn one_step_corollary() -> Outcome {
    timed(|| {
        let f = OneStepCocycle::full(vec![m2(1.0, 1.0, 0.0, 1.0), m2(2.0, 0.0, 2.0, 2.0)]).unwrap();
        let r = domination_report(&f, &DEFAULT_DOMINATION_DEPTHS, DEFAULT_KAPPA).unwrap();
        if r.verdict(1) != Some(Verdict::Dominated) {
            return (false, format!("index 1 verdict {:?}", r.verdicts[0]), doc(&r));
        }
        let (_, c) = adapted_metric(&f, 4).unwrap();
        let (gap, positive) = one_step_domination_check(&c, &r, 1).unwrap();
        (positive, format!("verdict dominated, min one-step gap {gap:.6} over {} windows", c.windows.len()), doc(&(r, gap, &c.sigma1_g)))
    })
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

const CRITERIA: [Criterion; 8] = [
    ("birkhoff bracket", birkhoff_bracket, Some(Duration::from_secs(5))),
    ("jsr oracle", jsr_oracle, Some(Duration::from_secs(30))),
    ("fish reproduction", fish_reproduction, None),
    ("homoclinic certificate", homoclinic, None),
    ("matrix geometry properties", matgeo_props, Some(Duration::from_secs(10))),
    ("domination and spectra", domination_and_spectra, None),
    ("adapted metric end to end", adapted_metric_end_to_end, Some(Duration::from_secs(60))),
    ("one-step domination", one_step_corollary, None),
];

fn main() {
    let mut all = true;
    let mut first = Vec::new();
    for (i, (name, run, limit)) in CRITERIA.iter().enumerate() {
        let v = run();
        let in_time = limit.is_none_or(|l| v.elapsed < l);
        let ok = v.pass && in_time;
        all &= ok;
        let budget = limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
        println!("criterion {}: {} {name}: {} [{:.2?}{budget}]", i + 1, if ok { "PASS" } else { "FAIL" }, v.detail, v.elapsed);
        first.push(v.json);
    }

    let props = |_: ()| doc(&run_suites(7, 1000).unwrap());
    let mut same = props(()) == props(());
    let mut differing = Vec::new();
    for (i, (_, run, _)) in CRITERIA.iter().enumerate() {
        if run().json != first[i] {
            same = false;
            differing.push(i + 1);
        }
    }
    all &= same;
    println!(
        "criterion 9: {} determinism: props seed 7 and criteria 1-8 repeat byte for byte{}",
        if same { "PASS" } else { "FAIL" },
        if differing.is_empty() { String::new() } else { format!(", differing {differing:?}") }
    );
    if !all {
        std::process::exit(1);
    }
}
