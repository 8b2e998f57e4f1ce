//! Adapted metrics by recursive midpoints.
//!
//! Starting from `ψ_0 ≡ o`, level `j + 1` is the midpoint of
//! `F^{(m)}(x)^{-1} * ψ_j(T^m x)` and `ψ_j(x)` with `m = 2^{k-j-1}`, so
//! `ψ_j` depends on the first `L_j = 2^k - 2^{k-j}` symbols. Conjugating by
//! `φ = ψ_k` gives a cocycle `G` whose one-step Cartan data is majorized by
//! the `N`-step averages of `F`, `N = 2^k`.
//!
//! Metric tables of dominated cocycles have condition numbers far beyond
//! `f64` after a few levels, and the certificates compare nearly aligned
//! metrics. Table arithmetic therefore runs in extended precision: double-double
//! first, then wider binary floats whenever the computed determinants drift
//! from the tracked ones (see [`PRECISION_LADDER`]).

use rayon::prelude::*;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::cocycle::{
    domination_report, product, spectrum_approx, Cocycle, DominationReport, OneStepCocycle, SpectrumApprox, Verdict, WindowedCocycle,
    DEFAULT_DOMINATION_DEPTHS, DEFAULT_KAPPA,
};
use crate::rotation::default_directions;
use crate::sampling::{admissible_word, rng};
use crate::error::{Error, Result};
use crate::matgeo::{majorization_slack, ChamberVector, Mat, SpdPoint};
use crate::symdyn::{Necklace, SymbolicSystem, Word};
use crate::xprec::{log_singular_values, BigFloat, DMat, DPoint, DProduct, Real};

/// Tolerance for the majorization certificates.
pub const OBA_TOL: f64 = 1e-8;

/// Rounding allowance added to `epsilon` in the inclusion check.
pub const INCLUSION_TOL: f64 = 1e-9;

/// Working precisions in bits, tried in order. 106 is double-double.
pub const PRECISION_LADDER: [usize; 3] = [106, 256, 512];

#[derive(Debug, Clone)]
enum Entries {
    Double(Vec<Option<DPoint<TwoFloat>>>),
    Wide(Vec<Option<DPoint<BigFloat>>>),
}

trait Stored: Real {
    fn slice(e: &Entries) -> &[Option<DPoint<Self>>];
    fn wrap(v: Vec<Option<DPoint<Self>>>) -> Entries;
}

impl Stored for TwoFloat {
    fn slice(e: &Entries) -> &[Option<DPoint<Self>>] {
        match e {
            Entries::Double(v) => v,
            Entries::Wide(_) => unreachable!("precision mismatch"),
        }
    }

    fn wrap(v: Vec<Option<DPoint<Self>>>) -> Entries {
        Entries::Double(v)
    }
}

impl Stored for BigFloat {
    fn slice(e: &Entries) -> &[Option<DPoint<Self>>] {
        match e {
            Entries::Wide(v) => v,
            Entries::Double(_) => unreachable!("precision mismatch"),
        }
    }

    fn wrap(v: Vec<Option<DPoint<Self>>>) -> Entries {
        Entries::Wide(v)
    }
}

/// `ψ_j` on the admissible words of length `L_j`.
#[derive(Debug, Clone)]
pub struct MetricTable {
    level: usize,
    window: usize,
    alphabet: usize,
    entries: Entries,
}

impl MetricTable {
    fn code(&self, w: &[u8]) -> usize {
        w[..self.window].iter().fold(0usize, |acc, &s| acc * self.alphabet + s as usize)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn entry<R: Stored>(&self, w: &[u8]) -> &DPoint<R> {
        R::slice(&self.entries)[self.code(w)].as_ref().expect("admissible window")
    }

    /// Entry for the first `window` symbols of `w`, rounded to `f64`.
    pub fn get(&self, w: &[u8]) -> SpdPoint {
        let (x, ld) = match &self.entries {
            Entries::Double(_) => {
                let p = self.entry::<TwoFloat>(w);
                (p.x.to_mat(), p.log_det)
            }
            Entries::Wide(_) => {
                let p = self.entry::<BigFloat>(w);
                (p.x.to_mat(), p.log_det)
            }
        };
        SpdPoint::from_factor(x, 0.5 * ld)
    }

    pub fn len(&self) -> usize {
        match &self.entries {
            Entries::Double(v) => v.iter().filter(|e| e.is_some()).count(),
            Entries::Wide(v) => v.iter().filter(|e| e.is_some()).count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All levels `ψ_0, …, ψ_k`.
#[derive(Debug, Clone)]
pub struct MetricRecursion {
    k: usize,
    bits: usize,
    pre: Preconditioning,
    levels: Vec<MetricTable>,
}

impl MetricRecursion {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        1 << self.k
    }

    /// Working precision of the tables in bits.
    pub fn precision_bits(&self) -> usize {
        self.bits
    }

    pub fn preconditioning(&self) -> Preconditioning {
        self.pre
    }

    /// Window of `ψ_0`; every level's window exceeds `L_j` by this much.
    pub fn base_window(&self) -> usize {
        self.pre.window()
    }

    pub fn level(&self, j: usize) -> &MetricTable {
        &self.levels[j]
    }

    /// `φ = ψ_k`.
    pub fn phi(&self) -> &MetricTable {
        &self.levels[self.k]
    }
}

/// `L_j = 2^k - 2^{k-j}`.
pub fn window_length(k: usize, j: usize) -> usize {
    (1 << k) - (1 << (k - j))
}

/// Largest supported `k`; `2^k` must stay a small window length.
pub const MAX_K: usize = 12;

/// Conjugation applied before the recursion, expressed as its starting
/// metric `ψ_0(w) = H(w) H(w)ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioning {
    /// `ψ_0 = o`.
    None,
    /// `d = 2` only: `H(w)` has unit columns along the expanding and
    /// contracting eigenvectors of the periodic product of the window `w`,
    /// so the two bundles become orthogonal. Windows whose periodic product
    /// has complex or equal-modulus eigenvalues keep `H = I`.
    Orthogonal { window: usize },
}

impl Preconditioning {
    fn window(&self) -> usize {
        match self {
            Preconditioning::None => 0,
            Preconditioning::Orthogonal { window } => *window,
        }
    }
}

/// Unit eigenvectors `(u, s)` of the larger and smaller eigenvalue moduli of
/// a real `2 × 2` matrix, or `None` without a real modulus gap.
fn eigen_directions(p: &Mat) -> Option<([f64; 2], [f64; 2])> {
    let (a, b, c, d) = (p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)]);
    let t = a + d;
    let det = a * d - b * c;
    let disc = t * t - 4.0 * det;
    if !(disc > 0.0) {
        return None;
    }
    let big = 0.5 * (t + t.signum() * disc.sqrt());
    if big == 0.0 {
        return None;
    }
    let small = det / big;
    if !(small.abs() < big.abs()) {
        return None;
    }
    let direction = |l: f64| {
        let (v, w) = ([b, l - a], [l - d, c]);
        let pick = if v[0].hypot(v[1]) >= w[0].hypot(w[1]) { v } else { w };
        let n = pick[0].hypot(pick[1]);
        (n > 0.0).then(|| [pick[0] / n, pick[1] / n])
    };
    Some((direction(big)?, direction(small)?))
}

/// `H(w)` and `log|det H(w)|` for every admissible word of the
/// preconditioning window, indexed like a metric table.
fn origin_factors(f: &OneStepCocycle, pre: Preconditioning) -> Result<Vec<Option<(Mat, f64)>>> {
    let d = f.dim();
    let window = pre.window();
    if window == 0 {
        return Ok(vec![Some((Mat::identity(d, d), 0.0))]);
    }
    if d != 2 {
        return Err(Error::Precondition(format!("orthogonal preconditioning needs d = 2, got {d}")));
    }
    let a = f.system().alphabet_size();
    let mut out = vec![None; a.pow(window as u32)];
    for w in words(f.system(), window)? {
        let code = w.symbols().iter().fold(0usize, |acc, &x| acc * a + x as usize);
        let p = product(f, &w)?;
        let h = eigen_directions(p.mantissa())
            .map(|(u, s)| Mat::from_row_slice(2, 2, &[u[0], s[0], u[1], s[1]]))
            .filter(|h| (h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]).abs() > 1e-8)
            .unwrap_or_else(|| Mat::identity(2, 2));
        let ld = (h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]).abs().ln();
        out[code] = Some((h, ld));
    }
    Ok(out)
}

/// Letter matrices and their inverses in extended precision.
struct Letters<R> {
    bits: usize,
    forward: Vec<(DMat<R>, f64)>,
    inverse: Vec<(DMat<R>, f64)>,
}

impl<R: Real> Letters<R> {
    fn new(f: &OneStepCocycle, bits: usize) -> Result<Self> {
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        for a in 0..f.system().alphabet_size() as u8 {
            let m = DMat::from_mat(f.matrix(a), bits);
            let inv = m.solve(&DMat::identity(f.dim(), bits))?;
            forward.push((m, f.log_abs_det(a)));
            inverse.push((inv, -f.log_abs_det(a)));
        }
        Ok(Letters { bits, forward, inverse })
    }

    /// `F^{(m)}(x) * p` for the letters `x_0 … x_{m-1}`, one letter at a time.
    fn push(&self, letters: &[u8], p: &DPoint<R>) -> DPoint<R> {
        letters.iter().fold(p.clone(), |q, &a| {
            let (g, ld) = &self.forward[a as usize];
            q.act(g, *ld)
        })
    }

    /// `F^{(m)}(x)^{-1} * p`, applying the letter inverses to the factor
    /// columns so the product is never inverted as a whole.
    fn pull(&self, letters: &[u8], p: &DPoint<R>) -> DPoint<R> {
        letters.iter().rev().fold(p.clone(), |q, &a| {
            let (g, ld) = &self.inverse[a as usize];
            q.act(g, *ld)
        })
    }

    /// `(1/N) σ(F^{(N)}(w))`.
    fn averaged_cartan(&self, w: &[u8]) -> Result<ChamberVector> {
        let mut p = DProduct::identity(self.forward[0].0.dim(), self.bits);
        let mut ld = 0.0;
        for &a in w {
            let (g, l) = &self.forward[a as usize];
            p = p.left_mul(g);
            ld += l;
        }
        let logs = log_singular_values(&p.m, p.log_scale, ld)?;
        Ok(ChamberVector::sorted(logs).scaled(1.0 / w.len() as f64))
    }
}

fn words(system: &SymbolicSystem, len: usize) -> Result<Vec<Word>> {
    Ok(system.words_of_length(len)?.collect())
}

fn recursion_at<R: Stored>(f: &OneStepCocycle, k: usize, bits: usize, pre: Preconditioning) -> Result<MetricRecursion> {
    let sys = f.system();
    let a = sys.alphabet_size();
    let letters = Letters::<R>::new(f, bits)?;
    let origin: Vec<Option<DPoint<R>>> = origin_factors(f, pre)?
        .into_iter()
        .map(|e| e.map(|(h, ld)| DPoint::<R>::identity(f.dim(), bits).act(&DMat::from_mat(&h, bits), ld)))
        .collect();
    let mut levels = vec![MetricTable { level: 0, window: pre.window(), alphabet: a, entries: R::wrap(origin) }];
    for j in 0..k {
        let m = 1usize << (k - j - 1);
        let prev = &levels[j];
        let len = m + prev.window;
        let next: Vec<(usize, DPoint<R>)> = words(sys, len)?
            .into_par_iter()
            .map(|w| {
                let s = w.symbols();
                let pulled = letters.pull(&s[..m], prev.entry(&s[m..]));
                let code = s.iter().fold(0usize, |acc, &x| acc * a + x as usize);
                Ok((code, prev.entry::<R>(s).midpoint(&pulled)?))
            })
            .collect::<Result<_>>()?;
        let mut entries = vec![None; a.pow(len as u32)];
        for (c, p) in next {
            entries[c] = Some(p);
        }
        levels.push(MetricTable { level: j + 1, window: len, alphabet: a, entries: R::wrap(entries) });
    }
    Ok(MetricRecursion { k, bits, pre, levels })
}

fn check_recursion_input(f: &OneStepCocycle, k: usize, pre: Preconditioning) -> Result<()> {
    if k > MAX_K {
        return Err(Error::Precondition(format!("k = {k} exceeds the supported maximum {MAX_K}")));
    }
    let a = f.system().alphabet_size() as u128;
    let total: u128 = (0..=k).map(|j| a.saturating_pow((window_length(k, j) + pre.window()) as u32)).sum();
    f.system().budget().check_table(total)
}

/// Runs `attempt` at each precision of the ladder until it stops reporting
/// [`Error::Precision`].
fn escalate<T>(mut attempt: impl FnMut(usize) -> Result<T>) -> Result<T> {
    let mut last = None;
    for bits in PRECISION_LADDER {
        match attempt(bits) {
            Err(Error::Precision(msg)) => last = Some(msg),
            other => return other,
        }
    }
    Err(Error::Precision(format!("{} bits: {}", PRECISION_LADDER[PRECISION_LADDER.len() - 1], last.unwrap_or_default())))
}

fn recursion_with_bits(f: &OneStepCocycle, k: usize, bits: usize, pre: Preconditioning) -> Result<MetricRecursion> {
    if bits <= 106 {
        recursion_at::<TwoFloat>(f, k, bits, pre)
    } else {
        recursion_at::<BigFloat>(f, k, bits, pre)
    }
}

/// Runs the recursion up to level `k` from `ψ_0 = o`, keeping every level.
pub fn midpoint_recursion(f: &OneStepCocycle, k: usize) -> Result<MetricRecursion> {
    midpoint_recursion_with(f, k, Preconditioning::None)
}

pub fn midpoint_recursion_with(f: &OneStepCocycle, k: usize, pre: Preconditioning) -> Result<MetricRecursion> {
    check_recursion_input(f, k, pre)?;
    escalate(|bits| recursion_with_bits(f, k, bits, pre))
}

/// The recursion from `ψ_0 = o` and the conjugated cocycle, at the smallest
/// precision on the ladder for which both complete.
pub fn adapted_metric(f: &OneStepCocycle, k: usize) -> Result<(MetricRecursion, AdaptedConjugation)> {
    adapted_metric_with(f, k, Preconditioning::None)
}

pub fn adapted_metric_with(f: &OneStepCocycle, k: usize, pre: Preconditioning) -> Result<(MetricRecursion, AdaptedConjugation)> {
    check_recursion_input(f, k, pre)?;
    escalate(|bits| {
        let rec = recursion_with_bits(f, k, bits, pre)?;
        let c = conjugated_cocycle(f, &rec)?;
        Ok((rec, c))
    })
}

/// The cocycle `G(w) = φ(w_1…w_{N-1})^{-1/2} A_{w_0} φ(w_0…w_{N-2})^{1/2}`
/// over windows of length `N` together with its one-step Cartan data.
#[derive(Debug, Clone)]
pub struct AdaptedConjugation {
    pub k: usize,
    pub n: usize,
    /// Memory of `G`: `N` plus the preconditioning window.
    pub window: usize,
    /// Admissible windows of length `window`, lexicographic.
    pub windows: Vec<Word>,
    /// `σ(G(w))` per window.
    pub sigma1_g: Vec<ChamberVector>,
    /// `(1/N) σ(F^{(N)}(w))` per window (first `N` symbols).
    pub averaged: Vec<ChamberVector>,
    pub g: WindowedCocycle,
    /// Worst majorization slack of `σ(G(w)) ≼ (1/N) σ(F^{(N)}(w))` over all windows.
    pub oba_slack: f64,
}

impl AdaptedConjugation {
    fn index(&self, w: &[u8]) -> Option<usize> {
        self.windows.binary_search_by(|x| x.symbols().cmp(&w[..self.window])).ok()
    }
}

/// `(1/n) σ(F^{(n)}(w))` over the first `n` symbols of lexicographically
/// sorted windows, sharing prefix products between neighbours.
fn averaged_cartans<R: Real>(letters: &Letters<R>, windows: &[Word], n: usize) -> Result<Vec<ChamberVector>> {
    let d = letters.forward[0].0.dim();
    let mut stack: Vec<(DProduct<R>, f64)> = vec![(DProduct::identity(d, letters.bits), 0.0)];
    let mut prev: &[u8] = &[];
    let mut out = Vec::with_capacity(windows.len());
    for w in windows {
        let s = &w.symbols()[..n];
        let common = prev.iter().zip(s).take_while(|(a, b)| a == b).count();
        stack.truncate(common + 1);
        for &a in &s[common..] {
            let (top, ld) = stack.last().expect("root stays");
            let (g, l) = &letters.forward[a as usize];
            let next = (top.left_mul(g), ld + l);
            stack.push(next);
        }
        let (p, ld) = stack.last().expect("root stays");
        let logs = log_singular_values(&p.m, p.log_scale, *ld)?;
        out.push(ChamberVector::sorted(logs).scaled(1.0 / s.len() as f64));
        prev = s;
    }
    Ok(out)
}

fn conjugated_at<R: Stored>(f: &OneStepCocycle, rec: &MetricRecursion) -> Result<AdaptedConjugation> {
    let n = rec.n();
    let phi = rec.phi();
    let sys = f.system();
    let letters = Letters::<R>::new(f, rec.bits)?;
    let window = phi.window + 1;
    let windows = words(sys, window)?;
    let roots: Vec<Option<(DMat<R>, DMat<R>)>> =
        R::slice(&phi.entries).par_iter().map(|e| e.as_ref().map(|p| p.half_powers())).collect();
    let root = |w: &[u8]| roots[phi.code(w)].as_ref().expect("admissible window");
    let g_of = |w: &[u8]| root(&w[1..]).1.mul(&letters.forward[w[0] as usize].0).mul(&root(w).0);
    let (sigma1_g, g_table): (Vec<ChamberVector>, Vec<Mat>) = windows
        .par_iter()
        .map(|w| {
            let s = w.symbols();
            let ld = f.log_abs_det(s[0]) + 0.5 * (phi.entry::<R>(s).log_det - phi.entry::<R>(&s[1..]).log_det);
            let g = g_of(s);
            Ok((ChamberVector::sorted(log_singular_values(&g, 0.0, ld)?), g.to_mat()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let averaged = averaged_cartans(&letters, &windows, n)?;
    let oba_slack = sigma1_g
        .iter()
        .zip(&averaged)
        .map(|(s, a)| majorization_slack(s.as_slice(), a.as_slice()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let lookup = |w: &[u8]| windows.binary_search_by(|x| x.symbols().cmp(w)).map(|i| g_table[i].clone());
    let g = WindowedCocycle::tabulate(sys, f.dim(), window, |w| lookup(w).map_err(|_| Error::Inadmissible { word: w.to_vec() }))?;
    Ok(AdaptedConjugation { k: rec.k(), n, window, windows, sigma1_g, averaged, g, oba_slack })
}

/// Conjugates by `φ^{-1/2}` at the precision of `rec`.
pub fn conjugated_cocycle(f: &OneStepCocycle, rec: &MetricRecursion) -> Result<AdaptedConjugation> {
    match rec.phi().entries {
        Entries::Double(_) => conjugated_at::<TwoFloat>(f, rec),
        Entries::Wide(_) => conjugated_at::<BigFloat>(f, rec),
    }
}

/// Worst slack of `σ(G(x)) ≼ (1/N) σ(F^{(N)}(x))` over the sampled words
/// (each of length at least `result.window`).
pub fn verify_oba(f: &OneStepCocycle, result: &AdaptedConjugation, sample: &[Word]) -> Result<f64> {
    escalate(|bits| {
        if bits <= 106 {
            verify_oba_at::<TwoFloat>(f, result, sample, bits)
        } else {
            verify_oba_at::<BigFloat>(f, result, sample, bits)
        }
    })
}

fn verify_oba_at<R: Real>(f: &OneStepCocycle, result: &AdaptedConjugation, sample: &[Word], bits: usize) -> Result<f64> {
    let letters = Letters::<R>::new(f, bits)?;
    let mut worst = f64::INFINITY;
    for w in sample {
        if w.len() < result.window {
            return Err(Error::Context { needed: result.window, available: w.len() });
        }
        f.system().check_admissible(w.symbols())?;
        let i = result.index(w.symbols()).ok_or_else(|| Error::Inadmissible { word: w.symbols().to_vec() })?;
        let avg = letters.averaged_cartan(&w.symbols()[..result.n])?;
        worst = worst.min(majorization_slack(result.sigma1_g[i].as_slice(), avg.as_slice())?);
    }
    Ok(worst)
}

/// For each level `j < k`, the worst slack over the sampled words of
/// `δ(ψ_{j+1}(T^m x), F^{(m)}(x) * ψ_{j+1}(x)) ≼ ½ δ(ψ_j(T^{2m} x), F^{(2m)}(x) * ψ_j(x))`.
pub fn telescoping_slacks(f: &OneStepCocycle, rec: &MetricRecursion, sample: &[Word]) -> Result<Vec<f64>> {
    let needed = rec.n() + rec.base_window();
    if let Some(w) = sample.iter().find(|w| w.len() < needed) {
        return Err(Error::Context { needed, available: w.len() });
    }
    match rec.phi().entries {
        Entries::Double(_) => telescoping_at::<TwoFloat>(f, rec, sample),
        Entries::Wide(_) => telescoping_at::<BigFloat>(f, rec, sample),
    }
}

fn telescoping_at<R: Stored>(f: &OneStepCocycle, rec: &MetricRecursion, sample: &[Word]) -> Result<Vec<f64>> {
    let letters = Letters::<R>::new(f, rec.bits)?;
    (0..rec.k())
        .map(|j| {
            let m = 1usize << (rec.k() - j - 1);
            let lo = rec.level(j);
            let hi = rec.level(j + 1);
            let slacks: Vec<f64> = sample
                .par_iter()
                .map(|w| {
                    let s = w.symbols();
                    f.system().check_admissible(s)?;
                    let lhs = hi.entry::<R>(&s[m..]).vdist(&letters.push(&s[..m], hi.entry(s)))?;
                    let rhs: Vec<f64> =
                        lo.entry::<R>(&s[2 * m..]).vdist(&letters.push(&s[..2 * m], lo.entry(s)))?.into_iter().map(|x| 0.5 * x).collect();
                    majorization_slack(ChamberVector::sorted(lhs).as_slice(), ChamberVector::sorted(rhs).as_slice())
                })
                .collect::<Result<_>>()?;
            Ok(slacks.into_iter().fold(f64::INFINITY, f64::min))
        })
        .collect()
}

/// Worst excess of `Σ_1(G)` over the outer envelope per direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionReport {
    pub epsilon: f64,
    /// Smallest inflation of the outer envelope that contains `Σ_1(G)`.
    pub achieved_epsilon: f64,
    pub pass: bool,
    /// `(direction, max <c, σ(G)> - outer(c))` per sampled direction.
    pub excess: Vec<(Vec<f64>, f64)>,
}

/// Checks `Σ_1(G)` against the outer envelope computed at depth `N`, inflated by `epsilon`.
pub fn verify_inclusion(result: &AdaptedConjugation, outer: &SpectrumApprox, epsilon: f64) -> Result<InclusionReport> {
    if outer.depth != result.n {
        return Err(Error::Precondition(format!("outer envelope has depth {}, expected N = {}", outer.depth, result.n)));
    }
    let d = result.g.dim();
    if outer.theta.dim() != d {
        return Err(Error::Dimension { expected: d, got: outer.theta.dim() });
    }
    let excess: Vec<(Vec<f64>, f64)> = outer
        .outer
        .iter()
        .map(|s| {
            let top = result.sigma1_g.iter().map(|v| v.dot(&s.direction)).fold(f64::NEG_INFINITY, f64::max);
            (s.direction.clone(), top - s.bound)
        })
        .collect();
    let achieved_epsilon = excess.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(InclusionReport { epsilon, achieved_epsilon, pass: achieved_epsilon <= epsilon + INCLUSION_TOL, excess })
}

/// Smallest one-step gap `log s_i(G(w)) - log s_{i+1}(G(w))` over windows,
/// for an index the domination report verdicts dominated.
pub fn one_step_domination_check(result: &AdaptedConjugation, report: &DominationReport, index: usize) -> Result<(f64, bool)> {
    let d = result.g.dim();
    if index == 0 || index >= d {
        return Err(Error::Precondition(format!("index {index} outside 1..{d}")));
    }
    if report.verdict(index) != Some(Verdict::Dominated) {
        return Err(Error::Precondition(format!("index {index} is not verdicted dominated")));
    }
    let gap = result
        .sigma1_g
        .iter()
        .map(|v| v.as_slice()[index - 1] - v.as_slice()[index])
        .fold(f64::INFINITY, f64::min);
    Ok((gap, gap > 0.0))
}

/// Mean of `(1/N) σ(F^{(N)})` along the orbit of `w`: a diagnostic for how
/// close the certificate's right-hand side is to the Lyapunov vector of `w`.
pub fn favored_measure_mean(f: &OneStepCocycle, k: usize, w: &Necklace) -> Result<ChamberVector> {
    let n = 1usize << k;
    let q = w.period();
    let ext = w.word().periodic_extension(q + n);
    let mut acc = ChamberVector::zeros(f.dim());
    for i in 0..q {
        let p = product(f, &Word(ext.symbols()[i..i + n].to_vec()))?.cartan()?;
        acc = acc.add(&p.scaled(1.0 / (n * q) as f64))?;
    }
    Ok(acc)
}

/// Settings for [`adapt_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    pub k: usize,
    /// Number of sampled words for the certificates.
    pub samples: usize,
    pub seed: u64,
    /// Inclusion tolerance; defaults to the gap of the depth-`N` envelope.
    pub epsilon: Option<f64>,
    /// Sampled directions for the outer envelope.
    pub directions: usize,
    pub preconditioning: Preconditioning,
}

impl AdaptConfig {
    pub fn new(k: usize) -> Self {
        AdaptConfig { k, samples: 200, seed: 0, epsilon: None, directions: 64, preconditioning: Preconditioning::None }
    }
}

/// Longest necklace period used for the inner spectrum in [`adapt_report`].
const REPORT_MAX_PERIOD: usize = 12;

/// Builds the metric, samples words, and evaluates every certificate.
pub fn adapt_report(f: &OneStepCocycle, cfg: &AdaptConfig) -> Result<AdaptReport> {
    let d = f.dim();
    let domination = domination_report(f, &DEFAULT_DOMINATION_DEPTHS, DEFAULT_KAPPA)?;
    let pre = cfg.preconditioning;
    let (rec, c) = adapted_metric_with(f, cfg.k, pre)?;
    let n = c.n;
    let mut r = rng(cfg.seed);
    let sample: Vec<Word> =
        (0..cfg.samples).map(|_| admissible_word(&mut r, f.system(), c.window + 1)).collect::<Result<_>>()?;
    let oba = if sample.is_empty() { c.oba_slack } else { c.oba_slack.min(verify_oba(f, &c, &sample)?) };
    let telescoping = if sample.is_empty() { vec![] } else { telescoping_slacks(f, &rec, &sample)? };
    let outer = spectrum_approx(f, n.min(REPORT_MAX_PERIOD), n, &domination.theta, &default_directions(d, cfg.directions)?)?;
    let inclusion = verify_inclusion(&c, &outer, cfg.epsilon.unwrap_or(outer.gap))?;
    let mut one_step_gaps = std::collections::BTreeMap::new();
    for i in (1..d).filter(|&i| domination.verdict(i) == Some(Verdict::Dominated)) {
        let (gap, positive) = one_step_domination_check(&c, &domination, i)?;
        one_step_gaps.insert(i.to_string(), OneStepGap { gap, positive });
    }
    Ok(AdaptReport {
        k: cfg.k,
        n,
        sigma1_g: c.sigma1_g,
        oba_worst_slack: oba,
        telescoping_worst_slack: telescoping,
        inclusion: InclusionSummary { epsilon: inclusion.epsilon, achieved_epsilon: inclusion.achieved_epsilon, pass: inclusion.pass },
        one_step_gaps,
        theta: domination.theta.indices().collect(),
        precision_bits: rec.bits,
        preconditioning: pre,
    })
}

/// Run summary in the published JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptReport {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "sigma1_G")]
    pub sigma1_g: Vec<ChamberVector>,
    pub oba_worst_slack: f64,
    pub telescoping_worst_slack: Vec<f64>,
    pub inclusion: InclusionSummary,
    pub one_step_gaps: std::collections::BTreeMap<String, OneStepGap>,
    /// Indices without a domination verdict.
    pub theta: Vec<usize>,
    /// Working precision the recursion settled on.
    pub precision_bits: usize,
    /// Conjugation applied before the recursion.
    pub preconditioning: Preconditioning,
}

impl AdaptReport {
    /// Oba and telescoping slacks within [`OBA_TOL`], inclusion passed and
    /// every one-step gap positive.
    pub fn certified(&self) -> bool {
        self.oba_worst_slack >= -OBA_TOL
            && self.telescoping_worst_slack.iter().all(|&s| s >= -OBA_TOL)
            && self.inclusion.pass
            && self.one_step_gaps.values().all(|g| g.positive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionSummary {
    pub epsilon: f64,
    pub achieved_epsilon: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneStepGap {
    pub gap: f64,
    pub positive: bool,
}
