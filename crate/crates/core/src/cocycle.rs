//! Linear cocycles over symbolic systems: overflow-safe products, the sets
//! `Σ_n(F)`, Lyapunov vectors of periodic orbits, joint spectral radius and
//! subradius brackets, domination detection, Lyapunov/Morse spectrum
//! approximations, conjugation and extremal-norm defects.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matgeo::{cartan, cartan_with_log_det, jordan_with_log_det, log_abs_det, theta_hull_support, ChamberVector, Mat, SpdPoint, ThetaSet};
use crate::rotation::SupportSample;
use crate::symdyn::{enumerate_necklaces, Necklace, SftSpec, SymbolicSystem, Word};

/// Matrices with `|det|` at or below this are rejected.
pub const MIN_DET: f64 = 1e-12;

/// A product `e^{log_scale}·m` with `max|m_ij| ∈ [1/2, 2]` and its exact `log|det|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMatrix {
    m: Mat,
    log_scale: f64,
    log_abs_det: f64,
}

impl ScaledMatrix {
    pub fn identity(d: usize) -> Self {
        ScaledMatrix { m: Mat::identity(d, d), log_scale: 0.0, log_abs_det: 0.0 }
    }

    pub fn from_matrix(m: &Mat) -> Result<Self> {
        let ld = log_abs_det(m)?;
        let mut s = ScaledMatrix { m: m.clone(), log_scale: 0.0, log_abs_det: ld };
        s.renormalize();
        Ok(s)
    }

    fn renormalize(&mut self) {
        let a = self.m.amax();
        if a > 0.0 && !(0.5..=2.0).contains(&a) {
            let e = a.log2().round() as i32;
            // Powers of two rescale exactly.
            self.m *= 2f64.powi(-e);
            self.log_scale += e as f64 * LN_2;
        }
    }

    /// `a · self`, where `log_abs_det_a = log|det a|`.
    pub fn left_mul(&self, a: &Mat, log_abs_det_a: f64) -> ScaledMatrix {
        let mut s = ScaledMatrix { m: a * &self.m, log_scale: self.log_scale, log_abs_det: self.log_abs_det + log_abs_det_a };
        s.renormalize();
        s
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn mantissa(&self) -> &Mat {
        &self.m
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// The represented matrix (may overflow for long products).
    pub fn to_matrix(&self) -> Mat {
        &self.m * self.log_scale.exp()
    }

    fn shifted(&self, v: ChamberVector) -> ChamberVector {
        ChamberVector::sorted(v.as_slice().iter().map(|x| x + self.log_scale).collect())
    }

    fn mantissa_log_det(&self) -> f64 {
        self.log_abs_det - self.dim() as f64 * self.log_scale
    }

    pub fn cartan(&self) -> Result<ChamberVector> {
        Ok(self.shifted(cartan_with_log_det(&self.m, self.mantissa_log_det())?))
    }

    pub fn jordan(&self) -> Result<ChamberVector> {
        Ok(self.shifted(jordan_with_log_det(&self.m, self.mantissa_log_det())?))
    }

    /// `log ‖·‖` for the operator 2-norm.
    pub fn log_norm(&self) -> Result<f64> {
        Ok(self.cartan()?.as_slice()[0])
    }
}

/// A matrix-valued function on the base that depends on the first
/// `memory()` symbols.
pub trait Cocycle: Send + Sync {
    fn system(&self) -> &SymbolicSystem;
    fn dim(&self) -> usize;
    fn memory(&self) -> usize;
    /// Matrix at points whose first `memory()` symbols are `window`, with `log|det|`.
    fn step(&self, window: &[u8]) -> (&Mat, f64);
}

/// `F(x) = A_{x_0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepCocycle {
    matrices: Vec<Mat>,
    log_dets: Vec<f64>,
    system: SymbolicSystem,
}

/// JSON form `{"dim": d, "matrices": [[[…]]], "forbidden": [[i, j], …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleSpec {
    pub dim: usize,
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub forbidden: Vec<[usize; 2]>,
}

impl OneStepCocycle {
    /// One matrix per symbol of `system`.
    pub fn new(matrices: Vec<Mat>, system: SymbolicSystem) -> Result<Self> {
        if matrices.len() != system.alphabet_size() {
            return Err(Error::Dimension { expected: system.alphabet_size(), got: matrices.len() });
        }
        let d = matrices[0].nrows();
        let mut log_dets = Vec::with_capacity(matrices.len());
        for a in &matrices {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::Dimension { expected: d, got: if a.nrows() != d { a.nrows() } else { a.ncols() } });
            }
            let ld = log_abs_det(a)?;
            if ld <= MIN_DET.ln() {
                return Err(Error::NotInvertible);
            }
            log_dets.push(ld);
        }
        Ok(OneStepCocycle { matrices, log_dets, system })
    }

    /// Over the full shift on `matrices.len()` symbols.
    pub fn full(matrices: Vec<Mat>) -> Result<Self> {
        let system = SymbolicSystem::full_shift(matrices.len())?;
        Self::new(matrices, system)
    }

    /// Identity matrices over the full `alphabet`-shift.
    pub fn identity(dim: usize, alphabet: usize) -> Result<Self> {
        Self::full(vec![Mat::identity(dim, dim); alphabet])
    }

    pub fn from_spec(spec: &CocycleSpec) -> Result<Self> {
        if spec.matrices.is_empty() {
            return Err(Error::Input("cocycle needs at least one matrix".into()));
        }
        let mut mats = Vec::with_capacity(spec.matrices.len());
        for rows in &spec.matrices {
            if rows.len() != spec.dim || rows.iter().any(|r| r.len() != spec.dim) {
                return Err(Error::Input(format!("every matrix must be {0}x{0}", spec.dim)));
            }
            mats.push(Mat::from_fn(spec.dim, spec.dim, |i, j| rows[i][j]));
        }
        let system = SymbolicSystem::from_spec(&SftSpec { alphabet: mats.len(), forbidden: spec.forbidden.clone() })?;
        Self::new(mats, system)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CocycleSpec = serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> CocycleSpec {
        CocycleSpec {
            dim: self.dim(),
            matrices: self.matrices.iter().map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()).collect(),
            forbidden: self.system.to_spec().forbidden,
        }
    }

    pub fn with_system(mut self, system: SymbolicSystem) -> Result<Self> {
        if system.alphabet_size() != self.matrices.len() {
            return Err(Error::Dimension { expected: self.matrices.len(), got: system.alphabet_size() });
        }
        self.system = system;
        Ok(self)
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.matrices
    }

    pub fn matrix(&self, symbol: u8) -> &Mat {
        &self.matrices[symbol as usize]
    }

    pub fn log_abs_det(&self, symbol: u8) -> f64 {
        self.log_dets[symbol as usize]
    }
}

impl Cocycle for OneStepCocycle {
    fn system(&self) -> &SymbolicSystem {
        &self.system
    }

    fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    fn memory(&self) -> usize {
        1
    }

    fn step(&self, window: &[u8]) -> (&Mat, f64) {
        let s = window[0] as usize;
        (&self.matrices[s], self.log_dets[s])
    }
}

/// A cocycle given by a table over windows of fixed length.
#[derive(Debug, Clone)]
pub struct WindowedCocycle {
    system: SymbolicSystem,
    dim: usize,
    memory: usize,
    /// Indexed by the base-`k` code of the window; `None` off the admissible words.
    table: Vec<Option<(Mat, f64)>>,
}

impl WindowedCocycle {
    fn code(&self, w: &[u8]) -> usize {
        let k = self.system.alphabet_size();
        w[..self.memory].iter().fold(0usize, |acc, &s| acc * k + s as usize)
    }

    /// Builds the table by evaluating `f` on every admissible window.
    pub fn tabulate(system: &SymbolicSystem, dim: usize, memory: usize, f: impl Fn(&[u8]) -> Result<Mat> + Sync) -> Result<Self> {
        if memory == 0 {
            return Err(Error::Precondition("window length must be at least 1".into()));
        }
        let words: Vec<Word> = system.words_of_length(memory)?.collect();
        system.budget().check_table(words.len() as u128)?;
        let k = system.alphabet_size();
        let size = k.checked_pow(memory as u32).ok_or(Error::Budget { requested: u128::MAX, limit: system.budget().max_table })?;
        system.budget().check_table(size as u128)?;
        let values: Vec<(usize, Mat, f64)> = words
            .par_iter()
            .map(|w| {
                let m = f(w.symbols())?;
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::Dimension { expected: dim, got: m.nrows() });
                }
                let ld = log_abs_det(&m)?;
                Ok((w.symbols().iter().fold(0usize, |acc, &s| acc * k + s as usize), m, ld))
            })
            .collect::<Result<_>>()?;
        let mut table = vec![None; size];
        for (c, m, ld) in values {
            table[c] = Some((m, ld));
        }
        Ok(WindowedCocycle { system: system.clone(), dim, memory, table })
    }

    /// Entry on the window given by the first `memory` symbols of `w`.
    pub fn get(&self, w: &[u8]) -> Option<&Mat> {
        self.table.get(self.code(w)).and_then(|e| e.as_ref()).map(|(m, _)| m)
    }
}

impl Cocycle for WindowedCocycle {
    fn system(&self) -> &SymbolicSystem {
        &self.system
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn memory(&self) -> usize {
        self.memory
    }

    fn step(&self, window: &[u8]) -> (&Mat, f64) {
        let (m, ld) = self.table[self.code(window)].as_ref().expect("admissible window");
        (m, *ld)
    }
}

/// `F(T^{n-1}x)⋯F(x)` for the `n = len - memory + 1` positions of `w`.
pub fn product<C: Cocycle + ?Sized>(c: &C, w: &Word) -> Result<ScaledMatrix> {
    let mem = c.memory();
    let s = w.symbols();
    if s.is_empty() {
        return Ok(ScaledMatrix::identity(c.dim()));
    }
    if s.len() < mem {
        return Err(Error::Context { needed: mem, available: s.len() });
    }
    c.system().check_admissible(s)?;
    Ok(product_unchecked(c, s))
}

fn product_unchecked<C: Cocycle + ?Sized>(c: &C, s: &[u8]) -> ScaledMatrix {
    let mem = c.memory();
    let mut p = ScaledMatrix::identity(c.dim());
    for i in 0..=(s.len() - mem) {
        let (a, ld) = c.step(&s[i..i + mem]);
        p = p.left_mul(a, ld);
    }
    p
}

/// Product over one period of the orbit coded by `w`.
pub fn periodic_product<C: Cocycle + ?Sized>(c: &C, w: &Necklace) -> Result<ScaledMatrix> {
    if !c.system().is_cyclically_admissible(w.symbols()) {
        return Err(Error::Inadmissible { word: w.symbols().to_vec() });
    }
    let q = w.period();
    let ext = w.word().periodic_extension(q + c.memory() - 1);
    Ok(product_unchecked(c, ext.symbols()))
}

/// Visits every admissible word carrying `1..=max_factors` factors together
/// with its product, sharing prefixes. Work is split across threads by
/// prefix; `merge` must be associative and commutative for reproducible results.
fn fold_products<C, T, V, M>(c: &C, max_factors: usize, init: impl Fn() -> T + Sync, visit: V, merge: M) -> Result<T>
where
    C: Cocycle + ?Sized,
    T: Send,
    V: Fn(&mut T, &[u8], usize, &ScaledMatrix) + Sync,
    M: Fn(T, T) -> T + Sync + Send,
{
    let mem = c.memory();
    let sys = c.system();
    let k = sys.alphabet_size();
    let max_len = max_factors + mem - 1;
    sys.check_word_budget(max_len)?;

    fn dfs<C: Cocycle + ?Sized, T>(
        c: &C,
        word: &mut Vec<u8>,
        prod: &ScaledMatrix,
        max_len: usize,
        acc: &mut T,
        visit: &(impl Fn(&mut T, &[u8], usize, &ScaledMatrix) + Sync),
    ) {
        let mem = c.memory();
        let len = word.len();
        if len >= mem {
            visit(acc, word, len + 1 - mem, prod);
        }
        if len == max_len {
            return;
        }
        for s in 0..c.system().alphabet_size() as u8 {
            if len > 0 && !c.system().allowed(word[len - 1], s) {
                continue;
            }
            word.push(s);
            if word.len() >= mem {
                let (a, ld) = c.step(&word[word.len() - mem..]);
                let next = prod.left_mul(a, ld);
                dfs(c, word, &next, max_len, acc, visit);
            } else {
                dfs(c, word, prod, max_len, acc, visit);
            }
            word.pop();
        }
    }

    // Short words serially, then one task per admissible prefix.
    let mut split = 1usize;
    while split < max_len && k.pow(split as u32) < 64 {
        split += 1;
    }
    split = split.min(max_len);
    let mut acc = init();
    if split > 1 {
        let mut word = Vec::new();
        let mut short = init();
        dfs(c, &mut word, &ScaledMatrix::identity(c.dim()), split - 1, &mut short, &visit);
        acc = merge(acc, short);
    }
    let prefixes: Vec<Word> = sys.words_of_length(split)?.collect();
    let rest = prefixes
        .par_iter()
        .map(|p| {
            let mut word = p.symbols().to_vec();
            let prod = if word.len() >= mem { product_unchecked(c, &word) } else { ScaledMatrix::identity(c.dim()) };
            let mut local = init();
            dfs(c, &mut word, &prod, max_len, &mut local, &visit);
            local
        })
        .reduce(&init, &merge);
    Ok(merge(acc, rest))
}

/// Cartan projections of all `n`-step products, one per admissible word, in lexicographic order.
pub fn sigma_n_with_words<C: Cocycle + ?Sized>(c: &C, n: usize) -> Result<Vec<(Word, ChamberVector)>> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let len = n + c.memory() - 1;
    let words: Vec<Word> = c.system().words_of_length(len)?.collect();
    words.into_par_iter().map(|w| {
        let v = product_unchecked(c, w.symbols()).cartan()?;
        Ok((w, v))
    })
    .collect()
}

/// `Σ_n(F)`: Cartan projections of all `n`-step products.
pub fn sigma_n<C: Cocycle + ?Sized>(c: &C, n: usize) -> Result<Vec<ChamberVector>> {
    Ok(sigma_n_with_words(c, n)?.into_iter().map(|(_, v)| v).collect())
}

/// `χ` of the period product `P`. For `d >= 3` the smallest entry is read
/// off `(P⁻¹)ᵀ = A_{w_{q-1}}^{-ᵀ} ⋯ A_{w_0}^{-ᵀ}`, where it is the top
/// modulus: taken from `P` it would carry an error of order `ε·e^{χ_1-χ_d}`.
/// The second smallest entry then absorbs `log|det P|`, so for `d = 3` every
/// entry is a top modulus or comes from the determinant.
pub fn periodic_jordan<C: Cocycle + ?Sized>(c: &C, w: &Necklace) -> Result<ChamberVector> {
    let p = periodic_product(c, w)?;
    let chi = p.jordan()?;
    let d = chi.dim();
    if d < 3 {
        return Ok(chi);
    }
    let q = w.period();
    let mem = c.memory();
    let ext = w.word().periodic_extension(q + mem - 1);
    let s = ext.symbols();
    let mut inv = ScaledMatrix::identity(d);
    for i in 0..q {
        let (a, ld) = c.step(&s[i..i + mem]);
        let a_inv = a.clone().try_inverse().ok_or(Error::NotInvertible)?;
        inv = inv.left_mul(&a_inv.transpose(), -ld);
    }
    let mut v = chi.as_slice().to_vec();
    v[d - 1] = -inv.jordan()?.as_slice()[0];
    let rest: f64 = v.iter().enumerate().filter(|&(i, _)| i != d - 2).map(|(_, x)| x).sum();
    v[d - 2] = p.log_abs_det() - rest;
    Ok(ChamberVector::sorted(v))
}

/// Lyapunov vector of the periodic measure on `w`: `(1/q)·χ(period product)`.
/// Agrees with `lim (1/n) σ(F^{(n)})` along the orbit since `σ(g^m)/m → χ(g)`.
pub fn lyap_vector_periodic<C: Cocycle + ?Sized>(c: &C, w: &Necklace) -> Result<ChamberVector> {
    Ok(periodic_jordan(c, w)?.scaled(1.0 / w.period() as f64))
}

/// Two-sided bound on the joint spectral radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JsrBracket {
    /// `max ρ(P_w)^{1/q}` over necklaces of period at most `depth`.
    pub lower: f64,
    pub witness: Necklace,
    /// `min_m max_{|w| = m} ‖P_w‖^{1/m}` over `m <= depth`.
    pub upper: f64,
    pub upper_length: usize,
    pub depth: usize,
}

/// Two-sided bound on the joint spectral subradius. Only the upper bound
/// is attained by a witness; the lower bound need not converge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubradiusBracket {
    pub lower: f64,
    pub upper: f64,
    pub witness: Necklace,
    pub depth: usize,
    pub lower_reliable: bool,
}

/// Relative tolerance for preferring an earlier (shorter) witness on ties.
const WITNESS_TIE: f64 = 1e-12;

fn best_necklace<C: Cocycle + ?Sized>(c: &C, depth: usize, maximize: bool) -> Result<(f64, Necklace)> {
    let necklaces = enumerate_necklaces(c.system(), depth)?;
    let rates: Vec<f64> = necklaces
        .par_iter()
        .map(|w| Ok(periodic_product(c, w)?.jordan()?.as_slice()[0] / w.period() as f64))
        .collect::<Result<_>>()?;
    let mut best = 0usize;
    for (i, &r) in rates.iter().enumerate().skip(1) {
        let margin = WITNESS_TIE * (1.0 + rates[best].abs());
        if (maximize && r > rates[best] + margin) || (!maximize && r < rates[best] - margin) {
            best = i;
        }
    }
    let best_rate = if maximize {
        rates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        rates.iter().copied().fold(f64::INFINITY, f64::min)
    };
    necklaces
        .into_iter()
        .nth(best)
        .map(|w| (best_rate, w))
        .ok_or_else(|| Error::Precondition("no periodic orbit within the period bound".into()))
}

/// Per-length extremes of `log s_1` and `log s_d` over all products.
struct LengthExtremes {
    max_top: Vec<f64>,
    min_bottom: Vec<f64>,
}

fn length_extremes<C: Cocycle + ?Sized>(c: &C, depth: usize) -> Result<LengthExtremes> {
    let d = c.dim();
    fold_products(
        c,
        depth,
        || LengthExtremes { max_top: vec![f64::NEG_INFINITY; depth + 1], min_bottom: vec![f64::INFINITY; depth + 1] },
        |acc, _, m, p| {
            let s = p.cartan().expect("invertible product");
            acc.max_top[m] = acc.max_top[m].max(s.as_slice()[0]);
            acc.min_bottom[m] = acc.min_bottom[m].min(s.as_slice()[d - 1]);
        },
        |mut a, b| {
            for m in 0..=depth {
                a.max_top[m] = a.max_top[m].max(b.max_top[m]);
                a.min_bottom[m] = a.min_bottom[m].min(b.min_bottom[m]);
            }
            a
        },
    )
}

pub fn jsr_bracket<C: Cocycle + ?Sized>(c: &C, depth: usize) -> Result<JsrBracket> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let (lower, witness) = best_necklace(c, depth, true)?;
    let ext = length_extremes(c, depth)?;
    let (upper_length, log_upper) = (1..=depth)
        .map(|m| (m, ext.max_top[m] / m as f64))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(JsrBracket { lower: lower.exp(), witness, upper: log_upper.exp(), upper_length, depth })
}

/// Lower bound from supermultiplicativity of the smallest singular value and
/// from `‖P‖ >= |det P|^{1/d}`.
pub fn subradius_bracket<C: Cocycle + ?Sized>(c: &C, depth: usize) -> Result<SubradiusBracket> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let (upper, witness) = best_necklace(c, depth, false)?;
    let ext = length_extremes(c, depth)?;
    let d = c.dim() as f64;
    let mut window_dets = Vec::new();
    c.system().for_each_word(c.memory(), |w| window_dets.push(c.step(w).1))?;
    let det_bound = window_dets.iter().copied().fold(f64::INFINITY, f64::min) / d;
    let sv_bound = (1..=depth).map(|m| ext.min_bottom[m] / m as f64).fold(f64::NEG_INFINITY, f64::max);
    let lower = det_bound.max(sv_bound).min(upper);
    Ok(SubradiusBracket { lower: lower.exp(), upper: upper.exp(), witness, depth, lower_reliable: false })
}

/// Default threshold `κ` for domination verdicts.
pub const DEFAULT_KAPPA: f64 = 1.05;
/// Default depths at which gap rates are measured.
pub const DEFAULT_DOMINATION_DEPTHS: [usize; 3] = [4, 8, 12];
/// Gap rates at or below this count as a wall hit.
pub const WALL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Dominated,
    Undominated,
    Inconclusive,
}

/// Observed singular-value gap rates and the resulting verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub depths: Vec<usize>,
    pub kappa: f64,
    /// `rates[i][t] = min_w (1/n)(log s_{i+1} - log s_{i+2})` at `n = depths[t]` (index `i + 1`).
    pub rates: Vec<Vec<f64>>,
    pub verdicts: Vec<Verdict>,
    /// Indices not verdicted dominated.
    pub theta: ThetaSet,
    /// Smallest `(1/q)(χ_i - χ_{i+1})` over necklaces up to the largest depth.
    pub periodic_gaps: Vec<f64>,
}

impl DominationReport {
    /// Verdict at the 1-based `index`.
    pub fn verdict(&self, index: usize) -> Option<Verdict> {
        index.checked_sub(1).and_then(|i| self.verdicts.get(i).copied())
    }
}

pub fn domination_report<C: Cocycle + ?Sized>(c: &C, depths: &[usize], kappa: f64) -> Result<DominationReport> {
    if depths.is_empty() || depths.windows(2).any(|p| p[0] >= p[1]) || depths[0] == 0 {
        return Err(Error::Precondition("depths must be nonempty, positive and strictly increasing".into()));
    }
    if !(kappa > 1.0) {
        return Err(Error::Precondition("kappa must exceed 1".into()));
    }
    let d = c.dim();
    let mut rates = vec![Vec::with_capacity(depths.len()); d.saturating_sub(1)];
    for &n in depths {
        let sig = sigma_n(c, n)?;
        for (i, r) in rates.iter_mut().enumerate() {
            let gap = sig.iter().map(|v| v.as_slice()[i] - v.as_slice()[i + 1]).fold(f64::INFINITY, f64::min);
            r.push(gap / n as f64);
        }
    }
    let threshold = kappa.ln();
    let last_two = depths.len().saturating_sub(2);
    let verdicts: Vec<Verdict> = rates
        .iter()
        .map(|r| {
            if r[last_two..].iter().all(|&x| x >= threshold) {
                Verdict::Dominated
            } else if *r.last().expect("nonempty") <= WALL_TOL {
                Verdict::Undominated
            } else {
                Verdict::Inconclusive
            }
        })
        .collect();
    let theta = ThetaSet::new(d, (1..d).filter(|&i| verdicts[i - 1] != Verdict::Dominated))?;
    let max_depth = *depths.last().expect("nonempty");
    let necklaces = enumerate_necklaces(c.system(), max_depth)?;
    let lyap: Vec<ChamberVector> = necklaces.par_iter().map(|w| lyap_vector_periodic(c, w)).collect::<Result<_>>()?;
    let periodic_gaps = (0..d.saturating_sub(1))
        .map(|i| lyap.iter().map(|v| v.as_slice()[i] - v.as_slice()[i + 1]).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(DominationReport { depths: depths.to_vec(), kappa, rates, verdicts, theta, periodic_gaps })
}

/// Inner and outer approximations of the Lyapunov and Morse spectra.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumApprox {
    /// Lyapunov vectors of periodic measures with their orbits.
    pub lplus: Vec<(ChamberVector, Necklace)>,
    pub theta: ThetaSet,
    /// Θ-hull support of the periodic Lyapunov vectors.
    pub inner: Vec<SupportSample>,
    /// Θ-hull support of `(1/depth) Σ_depth`.
    pub outer: Vec<SupportSample>,
    /// Plain convex hull support of the periodic Lyapunov vectors.
    pub iplus: Vec<SupportSample>,
    /// Weyl-symmetrized hull support of `(1/depth) Σ_depth`.
    pub weyl_outer: Vec<SupportSample>,
    pub depth: usize,
    /// Largest `outer - inner` over sampled directions.
    pub gap: f64,
}

impl SpectrumApprox {
    /// Smallest margin `outer(c) - <c, v>` over the periodic Lyapunov vectors.
    pub fn lplus_slack(&self) -> f64 {
        self.outer
            .iter()
            .map(|s| s.bound - self.lplus.iter().map(|(v, _)| v.dot(&s.direction)).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn outer_bound(&self, direction: &[f64]) -> Option<f64> {
        self.outer.iter().find(|s| s.direction == direction).map(|s| s.bound)
    }
}

fn supports(points: &[ChamberVector], theta: &ThetaSet, directions: &[Vec<f64>]) -> Result<Vec<SupportSample>> {
    directions
        .par_iter()
        .map(|c| Ok(SupportSample { direction: c.clone(), bound: theta_hull_support(points, theta, c)? }))
        .collect()
}

pub fn spectrum_approx<C: Cocycle + ?Sized>(
    c: &C,
    max_period: usize,
    depth: usize,
    theta: &ThetaSet,
    directions: &[Vec<f64>],
) -> Result<SpectrumApprox> {
    let d = c.dim();
    if theta.dim() != d {
        return Err(Error::Dimension { expected: d, got: theta.dim() });
    }
    if let Some(bad) = directions.iter().find(|v| v.len() != d) {
        return Err(Error::Dimension { expected: d, got: bad.len() });
    }
    if max_period == 0 || depth == 0 {
        return Err(Error::Precondition("max_period and depth must be at least 1".into()));
    }
    let necklaces = enumerate_necklaces(c.system(), max_period)?;
    let lyap: Vec<ChamberVector> = necklaces.par_iter().map(|w| lyap_vector_periodic(c, w)).collect::<Result<_>>()?;
    let scaled: Vec<ChamberVector> = sigma_n(c, depth)?.iter().map(|v| v.scaled(1.0 / depth as f64)).collect();
    let inner = supports(&lyap, theta, directions)?;
    let outer = supports(&scaled, theta, directions)?;
    let iplus = supports(&lyap, &ThetaSet::empty(d), directions)?;
    let weyl_outer = supports(&scaled, &ThetaSet::full(d), directions)?;
    let gap = inner.iter().zip(&outer).map(|(i, o)| o.bound - i.bound).fold(0.0, f64::max);
    Ok(SpectrumApprox { lplus: lyap.into_iter().zip(necklaces).collect(), theta: theta.clone(), inner, outer, iplus, weyl_outer, depth, gap })
}

/// `G(w) = H(w_1…w_L)^{-1} A_{w_0} H(w_0…w_{L-1})` over windows of length
/// `L + 1` (for `L = 0` the single entry of `h` is used on both sides).
pub fn conjugate(f: &OneStepCocycle, h: &BTreeMap<Word, Mat>, window: usize) -> Result<WindowedCocycle> {
    let sys = f.system();
    let d = f.dim();
    let mut inverses: BTreeMap<&Word, Mat> = BTreeMap::new();
    for (w, m) in h {
        if w.len() != window {
            return Err(Error::Context { needed: window, available: w.len() });
        }
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Dimension { expected: d, got: m.nrows() });
        }
        inverses.insert(w, m.clone().try_inverse().ok_or(Error::NotInvertible)?);
    }
    let mut missing = None;
    sys.for_each_word(window, |w| {
        if missing.is_none() && !h.contains_key(&Word(w.to_vec())) {
            missing = Some(w.to_vec());
        }
    })?;
    if let Some(w) = missing {
        return Err(Error::Input(format!("conjugacy undefined on window {}", Word(w))));
    }
    WindowedCocycle::tabulate(sys, d, window + 1, |w| {
        let here = Word(w[..window].to_vec());
        let there = Word(w[1..].to_vec());
        Ok(&inverses[&there] * f.matrix(w[0]) * &h[&here])
    })
}

/// `max log ‖A_{w_0}‖` measured from the inner product `φ(w_0…w_{L-1})` to
/// `φ(w_1…w_L)`, minus `beta_est`. Inner products are read as `⟨u,v⟩ = uᵀ φ^{-1} v`,
/// so the norm is `‖φ(w_1…)^{-1/2} A φ(w_0…)^{1/2}‖`.
pub fn extremal_defect(f: &OneStepCocycle, metric: &BTreeMap<Word, SpdPoint>, window: usize, beta_est: f64) -> Result<f64> {
    if !beta_est.is_finite() {
        return Err(Error::Input("beta_est must be finite".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut failure = None;
    f.system().for_each_word(window + 1, |w| {
        if failure.is_some() {
            return;
        }
        let (here, there) = if window == 0 { (Word(vec![]), Word(vec![])) } else { (Word(w[..window].to_vec()), Word(w[1..].to_vec())) };
        match (metric.get(&here), metric.get(&there)) {
            (Some(p), Some(q)) => {
                // Orthogonal factors of the square roots do not change the norm.
                match q.factor().clone().lu().solve(&(f.matrix(w[0]) * p.factor())) {
                    Some(g) => match cartan(&g) {
                        Ok(s) => worst = worst.max(s.as_slice()[0]),
                        Err(e) => failure = Some(e),
                    },
                    None => failure = Some(Error::NotInvertible),
                }
            }
            _ => failure = Some(Error::Input(format!("metric undefined near window {}", Word(w.to_vec())))),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(worst - beta_est)
}

/// Constant metric `{"" -> p}` for [`extremal_defect`] with window 0.
pub fn constant_metric(p: SpdPoint) -> BTreeMap<Word, SpdPoint> {
    BTreeMap::from([(Word(vec![]), p)])
}
