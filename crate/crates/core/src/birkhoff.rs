//! Scalar ergodic optimization: Birkhoff sums, two-sided brackets for the
//! maximal ergodic average, cohomologous smoothing, and subactions computed
//! by max-plus iteration over preimages.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::symdyn::{enumerate_necklaces, orbit_angles, CirclePoint, Necklace, SymbolicSystem, Word};

/// Extra bits of resolution for the dyadic evaluation grid of circle observables.
pub const GRID_GUARD_BITS: usize = 4;

/// Values of a locally constant function on the admissible words of a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTable {
    window: usize,
    alphabet: usize,
    values: Vec<f64>,
}

impl WindowTable {
    fn code(&self, s: &[u8]) -> usize {
        s[..self.window].iter().fold(0usize, |acc, &x| acc * self.alphabet + x as usize)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn get(&self, s: &[u8]) -> f64 {
        self.values[self.code(s)]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Constant(f64),
    Digit,
    DigitProduct,
    Table(WindowTable),
    CosAngle,
    SinAngle,
    Affine { inner: Box<Kind>, scale: f64, offset: f64 },
    Smoothed { inner: Box<Kind>, n: usize },
    Linear(Vec<(f64, Kind)>),
}

/// How an observable may be evaluated and bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Depends only on the first `window` symbols.
    LocallyConstant { window: usize },
    /// Function of the doubling-map angle with the given Lipschitz constant
    /// (with respect to the arc-length parameter `t ∈ R/Z`).
    Circle { lipschitz: f64 },
}

impl Kind {
    fn regime(&self) -> Result<Regime> {
        use Regime::*;
        Ok(match self {
            Kind::Constant(_) => LocallyConstant { window: 0 },
            Kind::Digit => LocallyConstant { window: 1 },
            Kind::DigitProduct => LocallyConstant { window: 2 },
            Kind::Table(t) => LocallyConstant { window: t.window },
            Kind::CosAngle | Kind::SinAngle => Circle { lipschitz: TAU },
            Kind::Affine { inner, scale, .. } => match inner.regime()? {
                Circle { lipschitz } => Circle { lipschitz: lipschitz * scale.abs() },
                lc => lc,
            },
            Kind::Smoothed { inner, n } => match inner.regime()? {
                LocallyConstant { window: 0 } => LocallyConstant { window: 0 },
                LocallyConstant { window } => LocallyConstant { window: window + n - 1 },
                Circle { lipschitz } => {
                    let growth: f64 = (0..*n).map(|i| 2f64.powi(i as i32)).sum();
                    Circle { lipschitz: lipschitz * growth / *n as f64 }
                }
            },
            Kind::Linear(terms) => {
                let mut window = 0usize;
                let mut lip: Option<f64> = None;
                for (a, k) in terms {
                    match k.regime()? {
                        LocallyConstant { window: w } => window = window.max(w),
                        Circle { lipschitz } => *lip.get_or_insert(0.0) += a.abs() * lipschitz,
                    }
                }
                match lip {
                    None => LocallyConstant { window },
                    Some(l) if window == 0 => Circle { lipschitz: l },
                    Some(_) => {
                        return Err(Error::Input(
                            "cannot combine circle observables with locally constant ones of positive window".into(),
                        ))
                    }
                }
            }
        })
    }

    fn eval_word(&self, s: &[u8]) -> f64 {
        match self {
            Kind::Constant(c) => *c,
            Kind::Digit => s[0] as f64,
            Kind::DigitProduct => (s[0] as f64) * (s[1] as f64),
            Kind::Table(t) => t.get(s),
            Kind::CosAngle | Kind::SinAngle => unreachable!("circle observable evaluated on a word"),
            Kind::Affine { inner, scale, offset } => scale * inner.eval_word(s) + offset,
            Kind::Smoothed { inner, n } => (0..*n).map(|i| inner.eval_word(&s[i..])).sum::<f64>() / *n as f64,
            Kind::Linear(terms) => terms.iter().map(|(a, k)| a * k.eval_word(s)).sum(),
        }
    }

    fn eval_circle(&self, p: CirclePoint) -> f64 {
        match self {
            Kind::Constant(c) => *c,
            Kind::CosAngle => (TAU * p.angle()).cos(),
            Kind::SinAngle => (TAU * p.angle()).sin(),
            Kind::Digit | Kind::DigitProduct | Kind::Table(_) => {
                let w = match self.regime() {
                    Ok(Regime::LocallyConstant { window }) => window,
                    _ => unreachable!(),
                };
                let mut digits = Vec::with_capacity(w);
                let mut q = p;
                for _ in 0..w {
                    digits.push(q.digit());
                    q = q.doubled();
                }
                self.eval_word(&digits)
            }
            Kind::Affine { inner, scale, offset } => scale * inner.eval_circle(p) + offset,
            Kind::Smoothed { inner, n } => {
                let mut q = p;
                let mut acc = 0.0;
                for _ in 0..*n {
                    acc += inner.eval_circle(q);
                    q = q.doubled();
                }
                acc / *n as f64
            }
            Kind::Linear(terms) => terms.iter().map(|(a, k)| a * k.eval_circle(p)).sum(),
        }
    }
}

/// A real function on the base, either locally constant on a symbolic system
/// or a Lipschitz function of the doubling-map angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    system: SymbolicSystem,
    kind: Kind,
}

/// Names accepted by [`Observable::builtin`].
pub const BUILTIN_OBSERVABLES: [&str; 4] = ["cos_angle", "sin_angle", "digit", "digit_product"];

impl Observable {
    pub fn constant(system: &SymbolicSystem, c: f64) -> Self {
        Observable { system: system.clone(), kind: Kind::Constant(c) }
    }

    /// `f(x) = x_0`.
    pub fn digit(system: &SymbolicSystem) -> Self {
        Observable { system: system.clone(), kind: Kind::Digit }
    }

    /// `f(x) = x_0 x_1`.
    pub fn digit_product(system: &SymbolicSystem) -> Self {
        Observable { system: system.clone(), kind: Kind::DigitProduct }
    }

    /// `f(t) = cos 2πt` on the doubling map (coded by the full 2-shift).
    pub fn cos_angle() -> Self {
        Observable { system: SymbolicSystem::full_shift(2).expect("two symbols"), kind: Kind::CosAngle }
    }

    /// `f(t) = sin 2πt` on the doubling map.
    pub fn sin_angle() -> Self {
        Observable { system: SymbolicSystem::full_shift(2).expect("two symbols"), kind: Kind::SinAngle }
    }

    pub fn builtin(name: &str, system: &SymbolicSystem) -> Result<Self> {
        match name {
            "cos_angle" => Ok(Self::cos_angle()),
            "sin_angle" => Ok(Self::sin_angle()),
            "digit" => Ok(Self::digit(system)),
            "digit_product" => Ok(Self::digit_product(system)),
            other => Err(Error::Input(format!("unknown observable {other:?}; expected one of {BUILTIN_OBSERVABLES:?}"))),
        }
    }

    /// Locally constant observable given by its value on every admissible
    /// word of length `window`. Missing admissible words are an error.
    pub fn table(system: &SymbolicSystem, values: &BTreeMap<Word, f64>) -> Result<Self> {
        let window = values.keys().next().map(|w| w.len()).unwrap_or(0);
        if values.keys().any(|w| w.len() != window) {
            return Err(Error::Input("table keys must all have the same length".into()));
        }
        if window == 0 {
            return Err(Error::Input("table needs words of positive length".into()));
        }
        let k = system.alphabet_size();
        let size = (k as u128).checked_pow(window as u32).unwrap_or(u128::MAX);
        system.budget().check_words(size)?;
        let mut table = WindowTable { window, alphabet: k, values: vec![f64::NAN; size as usize] };
        for (w, &v) in values {
            if w.symbols().iter().any(|&s| s as usize >= k) {
                return Err(Error::Input(format!("table word {w} uses symbols outside the alphabet")));
            }
            let c = table.code(w.symbols());
            table.values[c] = v;
        }
        let mut missing = None;
        system.for_each_word(window, |s| {
            if missing.is_none() && table.get(s).is_nan() {
                missing = Some(Word(s.to_vec()));
            }
        })?;
        if let Some(w) = missing {
            return Err(Error::Input(format!("table has no value for admissible word {w}")));
        }
        Ok(Observable { system: system.clone(), kind: Kind::Table(table) })
    }

    /// Parses a JSON object mapping words to values, e.g. `{"00": 0.5, "01": 1, …}`.
    pub fn table_from_json(system: &SymbolicSystem, text: &str) -> Result<Self> {
        let raw: BTreeMap<String, f64> = serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        let values = raw.into_iter().map(|(k, v)| Ok((Word::parse(&k)?, v))).collect::<Result<BTreeMap<_, _>>>()?;
        Self::table(system, &values)
    }

    pub fn system(&self) -> &SymbolicSystem {
        &self.system
    }

    pub fn regime(&self) -> Result<Regime> {
        self.kind.regime()
    }

    /// `a·f + b`.
    pub fn affine(&self, scale: f64, offset: f64) -> Observable {
        Observable {
            system: self.system.clone(),
            kind: Kind::Affine { inner: Box::new(self.kind.clone()), scale, offset },
        }
    }

    pub fn negated(&self) -> Observable {
        self.affine(-1.0, 0.0)
    }

    /// `Σ a_i f_i` over observables on the same system.
    pub fn linear_combination(terms: &[(f64, &Observable)]) -> Result<Observable> {
        let first = terms.first().ok_or_else(|| Error::Input("empty linear combination".into()))?;
        let system = first.1.system.clone();
        if terms.iter().any(|(_, f)| f.system != system) {
            return Err(Error::Input("observables live on different systems".into()));
        }
        let kind = Kind::Linear(terms.iter().map(|(a, f)| (*a, f.kind.clone())).collect());
        kind.regime()?;
        Ok(Observable { system, kind })
    }

    /// Piecewise-constant approximation of a circle observable: the value at
    /// the midpoint of each binary cylinder of length `window`.
    pub fn discretize(&self, window: usize) -> Result<Observable> {
        if window == 0 || window > 24 {
            return Err(Error::Input(format!("discretization window {window} out of range 1..=24")));
        }
        let system = SymbolicSystem::full_shift(2)?.with_budget(*self.system.budget());
        let mut values = BTreeMap::new();
        let cells = 1u64 << window;
        for j in 0..cells {
            let t = (j as f64 + 0.5) / cells as f64;
            let digits: Vec<u8> = (0..window).rev().map(|b| ((j >> b) & 1) as u8).collect();
            values.insert(Word(digits), self.kind.eval_circle(CirclePoint::Float(t)));
        }
        Observable::table(&system, &values)
    }

    /// Value at a base point carrying enough symbols.
    pub fn eval(&self, x: BasePoint<'_>) -> Result<f64> {
        match (self.regime()?, x) {
            (Regime::LocallyConstant { window }, BasePoint::Word(w)) => {
                if w.len() < window {
                    return Err(Error::Context { needed: window, available: w.len() });
                }
                Ok(self.kind.eval_word(w.symbols()))
            }
            (_, BasePoint::Circle(p)) => Ok(self.kind.eval_circle(p)),
            (Regime::Circle { .. }, BasePoint::Word(_)) => {
                Err(Error::Precondition("circle observables are evaluated at circle points".into()))
            }
        }
    }
}

/// A point of the base: a finite prefix of a symbolic sequence, or a circle point.
#[derive(Debug, Clone, Copy)]
pub enum BasePoint<'a> {
    Word(&'a Word),
    Circle(CirclePoint),
}

/// `f(x) + f(Tx) + … + f(T^{n-1}x)`.
pub fn birkhoff_sum(f: &Observable, x: BasePoint<'_>, n: usize) -> Result<f64> {
    match (f.regime()?, x) {
        (Regime::LocallyConstant { window }, BasePoint::Word(w)) => {
            let needed = if window == 0 || n == 0 { 0 } else { n + window - 1 };
            if w.len() < needed {
                return Err(Error::Context { needed, available: w.len() });
            }
            f.system.check_admissible(&w.symbols()[..needed.min(w.len())])?;
            Ok((0..n).map(|i| f.kind.eval_word(&w.symbols()[i.min(w.len())..])).sum())
        }
        (_, BasePoint::Circle(p)) => {
            let mut q = p;
            let mut acc = 0.0;
            for _ in 0..n {
                acc += f.kind.eval_circle(q);
                q = q.doubled();
            }
            Ok(acc)
        }
        (Regime::Circle { .. }, BasePoint::Word(_)) => {
            Err(Error::Precondition("circle observables are evaluated at circle points".into()))
        }
    }
}

/// Average of `f` over the periodic orbit coded by `w`.
pub fn periodic_average(f: &Observable, w: &Necklace) -> Result<f64> {
    if !f.system.is_cyclically_admissible(w.symbols()) {
        return Err(Error::Inadmissible { word: w.symbols().to_vec() });
    }
    periodic_average_kind(&f.kind, w)
}

fn periodic_average_kind(kind: &Kind, w: &Necklace) -> Result<f64> {
    let q = w.period();
    match kind.regime()? {
        Regime::LocallyConstant { window } => {
            let ext = w.word().periodic_extension(q + window.max(1) - 1);
            Ok((0..q).map(|i| kind.eval_word(&ext.symbols()[i..])).sum::<f64>() / q as f64)
        }
        Regime::Circle { .. } => {
            let pts = orbit_angles(w)?;
            Ok(pts.iter().map(|&p| kind.eval_circle(p)).sum::<f64>() / q as f64)
        }
    }
}

/// Sampled values of `f^{(depth)}` for one or more observables together
/// with the error term that turns the sample maximum into a rigorous bound
/// on the supremum.
#[derive(Debug, Clone)]
pub(crate) struct BirkhoffSamples {
    /// One row per sample, one column per observable.
    pub sums: Vec<Vec<f64>>,
    /// Per observable: bound on `|f^{(depth)}(x) - f^{(depth)}(sample)|`.
    pub errors: Vec<f64>,
    /// Bound per unit Lipschitz constant, for a joint constant of a vector observable.
    pub error_per_lipschitz: f64,
}

/// Evaluates `f_i^{(depth)}` for all `f_i` over all depth-cylinders
/// (locally constant case, exact) or over a dyadic grid (circle case).
pub(crate) fn birkhoff_samples(fs: &[&Observable], depth: usize) -> Result<BirkhoffSamples> {
    let first = fs.first().ok_or_else(|| Error::Input("no observables".into()))?;
    let system = &first.system;
    if fs.iter().any(|f| &f.system != system) {
        return Err(Error::Input("observables live on different systems".into()));
    }
    let regimes = fs.iter().map(|f| f.regime()).collect::<Result<Vec<_>>>()?;
    let mut window = 0usize;
    let mut lips: Vec<Option<f64>> = Vec::with_capacity(fs.len());
    for r in &regimes {
        match *r {
            Regime::LocallyConstant { window: w } => {
                window = window.max(w);
                lips.push(None);
            }
            Regime::Circle { lipschitz } => lips.push(Some(lipschitz)),
        }
    }
    let circle = lips.iter().any(|l| l.is_some());
    if circle && window > 0 {
        return Err(Error::Input("cannot sample circle and symbolic observables together".into()));
    }
    if !circle {
        let len = if window == 0 { 1 } else { depth + window - 1 };
        let mut sums = Vec::new();
        system.for_each_word(len, |s| {
            sums.push(
                fs.iter()
                    .map(|f| if window == 0 { depth as f64 * f.kind.eval_word(s) } else { (0..depth).map(|i| f.kind.eval_word(&s[i..])).sum() })
                    .collect(),
            );
        })?;
        return Ok(BirkhoffSamples { sums, errors: vec![0.0; fs.len()], error_per_lipschitz: 0.0 });
    }
    let max_lip = lips.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let extra = if max_lip > TAU { (max_lip / TAU).log2().ceil() as usize } else { 0 };
    let bits = depth + GRID_GUARD_BITS + extra;
    if bits >= 63 {
        return Err(Error::Budget { requested: u128::MAX, limit: system.budget().max_words });
    }
    let n = 1u64 << bits;
    system.budget().check_words(n as u128)?;
    let mask = n - 1;
    let h = 1.0 / n as f64;
    let vals: Vec<Vec<f64>> = fs
        .iter()
        .map(|f| (0..n).map(|j| f.kind.eval_circle(CirclePoint::Float(j as f64 * h))).collect())
        .collect();
    let mut sums = Vec::with_capacity(n as usize);
    for j in 0..n {
        let mut row = vec![0.0; fs.len()];
        let mut idx = j;
        for _ in 0..depth {
            for (r, v) in row.iter_mut().zip(&vals) {
                *r += v[idx as usize];
            }
            idx = (idx << 1) & mask;
        }
        sums.push(row);
    }
    // Every point is within h/2 of a grid point; the i-th iterate spreads
    // that distance by 2^i.
    let per_lip = (2f64.powi(depth as i32) - 1.0) * h / 2.0;
    let errors = lips.iter().map(|l| l.unwrap_or(0.0) * per_lip).collect();
    Ok(BirkhoffSamples { sums, errors, error_per_lipschitz: per_lip })
}

/// `(1/depth) sup f^{(depth)}`, an upper bound for the maximal ergodic average.
pub fn upper_envelope(f: &Observable, depth: usize) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let s = birkhoff_samples(&[f], depth)?;
    let max = s.sums.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok((max + s.errors[0]) / depth as f64)
}

/// `(1/depth) inf f^{(depth)}`, a lower bound for the minimal ergodic average.
pub fn lower_envelope(f: &Observable, depth: usize) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let s = birkhoff_samples(&[f], depth)?;
    let min = s.sums.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    Ok((min - s.errors[0]) / depth as f64)
}

/// Two-sided bound on the maximal ergodic average `β(f)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaBracket {
    /// Best periodic average found.
    pub lower: f64,
    pub lower_witness: Necklace,
    /// `(1/n) sup f^{(n)}` at `n = upper_depth`, corrected for sampling.
    pub upper: f64,
    pub upper_depth: usize,
    /// True when the upper bound needed no sampling correction.
    pub exact_envelope: bool,
}

/// Two-sided bound on the minimal ergodic average `α(f)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaBracket {
    pub lower: f64,
    pub lower_depth: usize,
    /// Smallest periodic average found.
    pub upper: f64,
    pub upper_witness: Necklace,
    pub exact_envelope: bool,
}

fn best_periodic(f: &Observable, max_period: usize, maximize: bool) -> Result<(f64, Necklace)> {
    let mut best: Option<(f64, Necklace)> = None;
    for w in enumerate_necklaces(&f.system, max_period)? {
        let v = periodic_average(f, &w)?;
        // Enumeration order is (period, lex); strict improvement keeps the first witness.
        let better = match &best {
            None => true,
            Some((b, _)) => if maximize { v > *b } else { v < *b },
        };
        if better {
            best = Some((v, w));
        }
    }
    best.ok_or_else(|| Error::Precondition("system has no periodic orbit within the period bound".into()))
}

/// Brackets `β(f)` between the best periodic average (periods up to
/// `max_period`) and the depth-`depth` envelope.
pub fn beta_bracket(f: &Observable, max_period: usize, depth: usize) -> Result<BetaBracket> {
    if max_period == 0 || depth == 0 {
        return Err(Error::Precondition("max_period and depth must be at least 1".into()));
    }
    let (lower, lower_witness) = best_periodic(f, max_period, true)?;
    let upper = upper_envelope(f, depth)?;
    let exact_envelope = matches!(f.regime()?, Regime::LocallyConstant { .. });
    Ok(BetaBracket { lower, lower_witness, upper, upper_depth: depth, exact_envelope })
}

/// Brackets `α(f)` directly by minimization.
pub fn alpha_bracket(f: &Observable, max_period: usize, depth: usize) -> Result<AlphaBracket> {
    if max_period == 0 || depth == 0 {
        return Err(Error::Precondition("max_period and depth must be at least 1".into()));
    }
    let (upper, upper_witness) = best_periodic(f, max_period, false)?;
    let lower = lower_envelope(f, depth)?;
    let exact_envelope = matches!(f.regime()?, Regime::LocallyConstant { .. });
    Ok(AlphaBracket { lower, lower_depth: depth, upper, upper_witness, exact_envelope })
}

/// `(1/n) f^{(n)}`, cohomologous to `f`.
pub fn smooth(f: &Observable, n: usize) -> Result<Observable> {
    if n == 0 {
        return Err(Error::Precondition("smoothing length must be at least 1".into()));
    }
    if n == 1 {
        return Ok(f.clone());
    }
    if let Kind::Constant(_) = f.kind {
        return Ok(f.clone());
    }
    Ok(Observable { system: f.system.clone(), kind: Kind::Smoothed { inner: Box::new(f.kind.clone()), n } })
}

/// A subaction `u` on words of length `window`, certifying
/// `f + u∘T - u <= beta_est + defect` everywhere.
///
/// `growth <= β(f) - beta_est <= defect` holds for any table, so a positive
/// `growth` proves `beta_est` too small.
#[derive(Debug, Clone, Serialize)]
pub struct SubactionTable {
    pub window: usize,
    #[serde(skip)]
    alphabet: usize,
    #[serde(skip)]
    values: Vec<f64>,
    pub beta_est: f64,
    /// `max (f + u∘T - u) - beta_est` over all admissible words of length `window + 1`.
    pub defect: f64,
    /// `min_x max_{Ty=x} (f + u∘T - u)(y) - beta_est`.
    pub growth: f64,
    pub sweeps: usize,
}

impl SubactionTable {
    fn code(&self, s: &[u8]) -> usize {
        s[..self.window].iter().fold(0usize, |acc, &x| acc * self.alphabet + x as usize)
    }

    /// Value on the window formed by the first `window` symbols of `s`.
    pub fn value(&self, s: &[u8]) -> f64 {
        self.values[self.code(s)]
    }

    /// `(word, value)` pairs over admissible windows.
    pub fn entries(&self, system: &SymbolicSystem) -> Result<Vec<(Word, f64)>> {
        let mut out = Vec::new();
        system.for_each_word(self.window, |s| out.push((Word(s.to_vec()), self.value(s))))?;
        Ok(out)
    }
}

const GROWTH_TOL: f64 = 1e-10;
/// Trailing iterates combined into the final table; covers max-plus cycles up to this length.
const CYCLE_WINDOW: usize = 64;

/// Max-plus iteration `(Lh)(x) = max_{Ty = x} [f(y) + h(y)] - beta_est` on
/// windows of length `window`, started at `h = 0`. The pointwise maximum of
/// the trailing iterates is a fixed point once the iteration has become
/// periodic; the returned subaction is `u = max h - h`.
///
/// Returns [`Error::Diverging`] when the final table proves `beta_est < β(f)`.
pub fn subaction_iterate(f: &Observable, beta_est: f64, window: usize, iters: usize) -> Result<SubactionTable> {
    let fw = match f.regime()? {
        Regime::LocallyConstant { window } => window,
        Regime::Circle { .. } => {
            return Err(Error::Precondition("subactions need a locally constant observable; discretize first".into()))
        }
    };
    if window == 0 || fw > window + 1 || iters == 0 {
        return Err(Error::Precondition(format!(
            "window {window} must be positive and cover the observable window {fw}; iters must be positive"
        )));
    }
    let sys = &f.system;
    let k = sys.alphabet_size();
    let size = (k as u128).checked_pow(window as u32 + 1).unwrap_or(u128::MAX);
    sys.budget().check_words(size)?;
    let size_w = k.pow(window as u32);
    let code = |s: &[u8]| s.iter().fold(0usize, |acc, &x| acc * k + x as usize);

    // Admissible (window+1)-words z: f(z), code(z[..W]), code(z[1..]).
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    sys.for_each_word(window + 1, |z| {
        edges.push((f.kind.eval_word(z), code(&z[..window]), code(&z[1..])));
    })?;
    let mut states = Vec::new();
    sys.for_each_word(window, |s| states.push(code(s)))?;

    let apply = |h: &[f64]| {
        let mut next = vec![f64::NEG_INFINITY; size_w];
        for &(fz, from, to) in &edges {
            let cand = fz + h[from] - beta_est;
            if cand > next[to] {
                next[to] = cand;
            }
        }
        next
    };
    let normalize = |h: &mut [f64]| {
        let min = states.iter().map(|&c| h[c]).fold(f64::INFINITY, f64::min);
        for &c in &states {
            h[c] -= min;
        }
        min
    };

    // Trailing normalized iterates with their cumulative shifts.
    let keep = CYCLE_WINDOW.min(iters);
    let mut trail: std::collections::VecDeque<(Vec<f64>, f64)> = std::collections::VecDeque::with_capacity(keep);
    let mut h = vec![0.0f64; size_w];
    let mut shift = 0.0;
    for _ in 0..iters {
        h = apply(&h);
        shift += normalize(&mut h);
        if trail.len() == keep {
            trail.pop_front();
        }
        trail.push_back((h.clone(), shift));
    }
    let mut hat = vec![f64::NEG_INFINITY; size_w];
    for (hi, si) in &trail {
        for &c in &states {
            hat[c] = hat[c].max(hi[c] + si - shift);
        }
    }
    normalize(&mut hat);
    let image = apply(&hat);
    let diffs = states.iter().map(|&c| image[c] - hat[c]);
    let growth = diffs.clone().fold(f64::INFINITY, f64::min);
    let defect = diffs.fold(f64::NEG_INFINITY, f64::max);
    if growth > GROWTH_TOL * (1.0 + beta_est.abs()) {
        return Err(Error::Diverging { rate: growth });
    }
    let hmax = states.iter().map(|&c| hat[c]).fold(f64::NEG_INFINITY, f64::max);
    let mut values = vec![f64::NAN; size_w];
    for &c in &states {
        values[c] = hmax - hat[c];
    }
    Ok(SubactionTable { window, alphabet: k, values, beta_est, defect, growth, sweeps: iters })
}

/// Bisection on divergence: returns the smallest estimate in
/// `[lo, hi]` (to `steps` halvings) for which the iteration stays bounded,
/// with its table.
pub fn refine_beta(f: &Observable, lo: f64, hi: f64, window: usize, iters: usize, steps: usize) -> Result<SubactionTable> {
    let mut lo = lo;
    let mut hi = hi;
    let mut best = subaction_iterate(f, hi, window, iters)?;
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        match subaction_iterate(f, mid, window, iters) {
            Ok(t) => {
                hi = mid;
                best = t;
            }
            Err(Error::Diverging { .. }) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Words of length `window + 1` on which `f + u∘T - u >= beta_est - tol`.
/// Every maximizing orbit only visits these cylinders.
pub fn maximizing_set(f: &Observable, table: &SubactionTable, tol: f64) -> Result<Vec<Word>> {
    if table.defect > tol {
        return Err(Error::Precondition(format!("subaction defect {} exceeds tolerance {tol}", table.defect)));
    }
    match f.regime()? {
        Regime::LocallyConstant { window } if window <= table.window + 1 => {}
        _ => return Err(Error::Precondition("observable does not match the subaction window".into())),
    }
    let w = table.window;
    let mut out = Vec::new();
    f.system.for_each_word(w + 1, |z| {
        let g = f.kind.eval_word(z) + table.value(&z[1..]) - table.value(&z[..w]);
        if g >= table.beta_est - tol {
            out.push(Word(z.to_vec()));
        }
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> SymbolicSystem {
        SymbolicSystem::full_shift(2).unwrap()
    }

    fn nk(s: &str) -> Necklace {
        Necklace::canonical(s.into()).unwrap()
    }

    #[test]
    fn birkhoff_sum_cases() {
        let c = Observable::constant(&two(), 2.5);
        let w: Word = "0110".into();
        assert_eq!(birkhoff_sum(&c, BasePoint::Word(&w), 7).unwrap(), 17.5);
        let cos = Observable::cos_angle();
        let third = CirclePoint::exact(1, 3).unwrap();
        assert!((birkhoff_sum(&cos, BasePoint::Circle(third), 2).unwrap() + 1.0).abs() < 1e-15);
        let d = Observable::digit(&two());
        assert_eq!(birkhoff_sum(&d, BasePoint::Word(&w), 3).unwrap(), 2.0);
    }

    #[test]
    fn birkhoff_sum_errors() {
        let d = Observable::digit_product(&two());
        let w: Word = "011".into();
        assert!(matches!(birkhoff_sum(&d, BasePoint::Word(&w), 3), Err(Error::Context { needed: 4, available: 3 })));
        assert!(birkhoff_sum(&Observable::cos_angle(), BasePoint::Word(&w), 1).is_err());
        let golden = SymbolicSystem::sft(2, &[[1, 1]]).unwrap();
        let bad: Word = "0110".into();
        assert!(matches!(birkhoff_sum(&Observable::digit(&golden), BasePoint::Word(&bad), 3), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn periodic_average_cases() {
        let cos = Observable::cos_angle();
        assert_eq!(periodic_average(&cos, &nk("0")).unwrap(), 1.0);
        assert!((periodic_average(&cos, &nk("01")).unwrap() + 0.5).abs() < 1e-15);
        let c = Observable::constant(&two(), -3.0);
        assert_eq!(periodic_average(&c, &nk("0111")).unwrap(), -3.0);
        let golden = SymbolicSystem::sft(2, &[[1, 1]]).unwrap();
        assert!(periodic_average(&Observable::digit(&golden), &nk("1")).is_err());
    }

    #[test]
    fn digit_observables_agree_on_circle_points() {
        // x0 on the coding of 2/7 = 0.010010…: digits 0,1,0.
        let d = Observable::digit(&two());
        let p = CirclePoint::exact(2, 7).unwrap();
        assert_eq!(birkhoff_sum(&d, BasePoint::Circle(p), 3).unwrap(), 1.0);
        assert!((periodic_average(&d, &nk("001")).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bracket_cases() {
        let c = Observable::constant(&two(), 0.75);
        let b = beta_bracket(&c, 4, 3).unwrap();
        assert_eq!((b.lower, b.upper), (0.75, 0.75));
        let d = Observable::digit(&two());
        let b = beta_bracket(&d, 1, 1).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        assert_eq!(b.lower_witness.to_string(), "1");
        let cos = Observable::cos_angle();
        let b = beta_bracket(&cos, 8, 12).unwrap();
        assert_eq!(b.lower, 1.0);
        assert_eq!(b.lower_witness.to_string(), "0");
        assert!(b.upper >= 1.0 && b.upper - 1.0 <= 0.05, "upper {}", b.upper);
        assert!(beta_bracket(&cos, 0, 3).is_err());
    }

    #[test]
    fn smooth_cases() {
        let d = Observable::digit(&two());
        assert_eq!(smooth(&d, 1).unwrap(), d);
        let g = smooth(&d, 2).unwrap();
        assert_eq!(g.regime().unwrap(), Regime::LocallyConstant { window: 2 });
        let w: Word = "10".into();
        assert_eq!(g.eval(BasePoint::Word(&w)).unwrap(), 0.5);
        assert_eq!(upper_envelope(&g, 1).unwrap(), 1.0);
        let c = Observable::constant(&two(), 4.0);
        assert_eq!(smooth(&c, 5).unwrap(), c);
        assert!(smooth(&d, 0).is_err());
    }

    #[test]
    fn subaction_cases() {
        let c = Observable::constant(&two(), 1.5);
        let t = subaction_iterate(&c, 1.5, 1, 5).unwrap();
        assert!(t.defect.abs() < 1e-15);
        assert!(t.entries(&two()).unwrap().iter().all(|(_, v)| *v == 0.0));

        let d = Observable::digit(&two());
        let t = subaction_iterate(&d, 1.0, 2, 20).unwrap();
        assert!(t.defect <= 1e-12, "defect {}", t.defect);
        assert!(matches!(subaction_iterate(&d, 0.9, 2, 20), Err(Error::Diverging { .. })));
        assert!(subaction_iterate(&Observable::cos_angle(), 1.0, 2, 5).is_err());
    }

    #[test]
    fn maximizing_set_cases() {
        let d = Observable::digit(&two());
        let t = subaction_iterate(&d, 1.0, 1, 20).unwrap();
        let set: Vec<String> = maximizing_set(&d, &t, 1e-9).unwrap().iter().map(|w| w.to_string()).collect();
        assert!(set.contains(&"11".to_string()));
        assert!(!set.contains(&"00".to_string()));

        let c = Observable::constant(&two(), 0.0);
        let t = subaction_iterate(&c, 0.0, 2, 3).unwrap();
        assert_eq!(maximizing_set(&c, &t, 1e-12).unwrap().len(), 8);
    }

    #[test]
    fn discretized_cosine_is_maximized_at_the_fixed_point() {
        let f = Observable::cos_angle().discretize(6).unwrap();
        let b = beta_bracket(&f, 8, 10).unwrap();
        assert_eq!(b.lower_witness.to_string(), "0");
        let t = refine_beta(&f, b.lower - 1e-3, b.upper, 6, 200, 40).unwrap();
        assert!(t.defect <= 1e-9);
        let set = maximizing_set(&f, &t, 1e-9).unwrap();
        // The cells next to t = 0 and t = 1 carry the same value, so both fixed points maximize.
        let names: Vec<String> = set.iter().map(|w| w.to_string()).collect();
        assert!(names.contains(&"0000000".to_string()) && names.contains(&"1111111".to_string()));
        // A non-maximizing periodic orbit leaves the set somewhere along its cycle.
        for cycle in ["01", "001", "011"] {
            let ext = Word::from(cycle).periodic_extension(cycle.len() + 6);
            let inside = (0..cycle.len()).all(|i| names.contains(&Word(ext.symbols()[i..i + 7].to_vec()).to_string()));
            assert!(!inside, "{cycle}");
        }
    }

    #[test]
    fn table_observables() {
        let sys = two();
        let f = Observable::table_from_json(&sys, r#"{"00": 0.0, "01": 1.0, "10": 2.0, "11": -1.0}"#).unwrap();
        assert_eq!(f.regime().unwrap(), Regime::LocallyConstant { window: 2 });
        let b = beta_bracket(&f, 6, 8).unwrap();
        assert!((b.lower - 1.5).abs() < 1e-15);
        assert_eq!(b.lower_witness.to_string(), "01");
        assert!(Observable::table_from_json(&sys, r#"{"00": 0.0, "01": 1.0}"#).is_err());
        assert!(Observable::builtin("nope", &sys).is_err());
    }
}
