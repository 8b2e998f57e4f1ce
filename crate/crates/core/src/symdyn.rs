//! Symbolic base dynamics: full shifts and subshifts of finite type, words,
//! necklaces (periodic orbits), Sturmian words and doubling-map angles.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::budget::Budget;
use crate::error::{Error, Result};

/// A one-sided subshift of finite type on the alphabet `{0, …, k-1}`.
///
/// The full shift is the special case where every transition is allowed.
#[derive(Debug, Clone)]
pub struct SymbolicSystem {
    alphabet: usize,
    transitions: Vec<bool>,
    metric_theta: Option<f64>,
    budget: Budget,
}

impl PartialEq for SymbolicSystem {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet && self.transitions == other.transitions
    }
}

/// JSON description of a subshift: `{"alphabet": k, "forbidden": [[i, j], …]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftSpec {
    pub alphabet: usize,
    #[serde(default)]
    pub forbidden: Vec<[usize; 2]>,
}

impl SymbolicSystem {
    pub fn full_shift(alphabet: usize) -> Result<Self> {
        Self::sft(alphabet, &[])
    }

    /// Subshift forbidding each two-letter word `ij` listed in `forbidden`.
    pub fn sft(alphabet: usize, forbidden: &[[usize; 2]]) -> Result<Self> {
        if alphabet == 0 || alphabet > u8::MAX as usize {
            return Err(Error::Input(format!("alphabet size {alphabet} out of range 1..=255")));
        }
        let mut transitions = vec![true; alphabet * alphabet];
        for &[i, j] in forbidden {
            if i >= alphabet || j >= alphabet {
                return Err(Error::Input(format!("forbidden transition {i}->{j} outside the alphabet")));
            }
            transitions[i * alphabet + j] = false;
        }
        for s in 0..alphabet {
            let out = (0..alphabet).any(|t| transitions[s * alphabet + t]);
            let inc = (0..alphabet).any(|t| transitions[t * alphabet + s]);
            if !out || !inc {
                return Err(Error::Input(format!("symbol {s} is a dead state")));
            }
        }
        Ok(SymbolicSystem { alphabet, transitions, metric_theta: None, budget: Budget::from_env() })
    }

    pub fn from_spec(spec: &SftSpec) -> Result<Self> {
        Self::sft(spec.alphabet, &spec.forbidden)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SftSpec = serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> SftSpec {
        let k = self.alphabet;
        let forbidden = (0..k * k)
            .filter(|&c| !self.transitions[c])
            .map(|c| [c / k, c % k])
            .collect();
        SftSpec { alphabet: k, forbidden }
    }

    pub fn with_metric_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Input(format!("metric parameter {theta} not in (0,1)")));
        }
        self.metric_theta = Some(theta);
        Ok(self)
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn metric_theta(&self) -> Option<f64> {
        self.metric_theta
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn is_full_shift(&self) -> bool {
        self.transitions.iter().all(|&t| t)
    }

    #[inline]
    pub fn allowed(&self, from: u8, to: u8) -> bool {
        self.transitions[from as usize * self.alphabet + to as usize]
    }

    pub fn is_admissible(&self, symbols: &[u8]) -> bool {
        symbols.iter().all(|&s| (s as usize) < self.alphabet)
            && symbols.windows(2).all(|p| self.allowed(p[0], p[1]))
    }

    /// Admissible as a periodic orbit: the wrap-around transition is allowed too.
    pub fn is_cyclically_admissible(&self, symbols: &[u8]) -> bool {
        match (symbols.first(), symbols.last()) {
            (Some(&a), Some(&z)) => self.is_admissible(symbols) && self.allowed(z, a),
            _ => true,
        }
    }

    pub fn check_admissible(&self, symbols: &[u8]) -> Result<()> {
        if self.is_admissible(symbols) {
            Ok(())
        } else {
            Err(Error::Inadmissible { word: symbols.to_vec() })
        }
    }

    /// Number of admissible words of length `n`, saturating at `u128::MAX`.
    pub fn count_words(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let k = self.alphabet;
        let mut counts = vec![1u128; k];
        for _ in 1..n {
            let mut next = vec![0u128; k];
            for (a, &c) in counts.iter().enumerate() {
                for (b, slot) in next.iter_mut().enumerate() {
                    if self.transitions[a * k + b] {
                        *slot = slot.saturating_add(c);
                    }
                }
            }
            counts = next;
        }
        counts.iter().fold(0u128, |acc, &c| acc.saturating_add(c))
    }

    pub fn check_word_budget(&self, n: usize) -> Result<u128> {
        let count = self.count_words(n);
        self.budget.check_words(count)?;
        Ok(count)
    }

    /// Iterator over all admissible words of length `n`, in lexicographic order.
    pub fn words_of_length(&self, n: usize) -> Result<WordIter<'_>> {
        self.check_word_budget(n)?;
        Ok(WordIter::new(self, n))
    }

    /// Calls `visit` on every admissible word of length `n` without allocating
    /// a `Word` per item.
    pub fn for_each_word<F: FnMut(&[u8])>(&self, n: usize, mut visit: F) -> Result<()> {
        self.check_word_budget(n)?;
        let mut it = WordIter::new(self, n);
        while let Some(w) = it.advance() {
            visit(w);
        }
        Ok(())
    }
}

/// Odometer over the admissible words of a fixed length.
pub struct WordIter<'a> {
    system: &'a SymbolicSystem,
    current: Vec<u8>,
    started: bool,
    done: bool,
}

impl<'a> WordIter<'a> {
    fn new(system: &'a SymbolicSystem, n: usize) -> Self {
        WordIter { system, current: vec![0; n], started: false, done: false }
    }

    /// Fills positions `from..` with the lexicographically smallest admissible
    /// continuation. Returns false if none exists.
    fn fill_from(&mut self, from: usize) -> bool {
        for i in from..self.current.len() {
            let prev = if i == 0 { None } else { Some(self.current[i - 1]) };
            match (0..self.system.alphabet as u8).find(|&s| prev.is_none_or(|p| self.system.allowed(p, s))) {
                Some(s) => self.current[i] = s,
                None => return false,
            }
        }
        true
    }

    fn advance(&mut self) -> Option<&[u8]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            if !self.fill_from(0) {
                self.done = true;
                return None;
            }
            return Some(&self.current);
        }
        let k = self.system.alphabet as u8;
        let mut pos = self.current.len();
        while pos > 0 {
            pos -= 1;
            let prev = if pos == 0 { None } else { Some(self.current[pos - 1]) };
            let next = (self.current[pos] + 1..k).find(|&s| prev.is_none_or(|p| self.system.allowed(p, s)));
            if let Some(s) = next {
                self.current[pos] = s;
                if self.fill_from(pos + 1) {
                    return Some(&self.current);
                }
            }
        }
        self.done = true;
        None
    }
}

impl Iterator for WordIter<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        self.advance().map(|s| Word(s.to_vec()))
    }
}

/// A finite string of symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    /// Parses `"0110"`-style digit strings (alphabets up to 10) or
    /// dot-separated symbol lists such as `"10.3.0"`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Input(format!("cannot parse word {text:?}"));
        if text.contains('.') {
            text.split('.').map(|t| t.parse::<u8>().map_err(|_| bad())).collect::<Result<Vec<_>>>().map(Word)
        } else {
            text.chars()
                .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(bad))
                .collect::<Result<Vec<_>>>()
                .map(Word)
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    /// The word repeated until it has at least `len` symbols, truncated to `len`.
    pub fn periodic_extension(&self, len: usize) -> Word {
        if self.0.is_empty() {
            return Word(Vec::new());
        }
        Word(self.0.iter().copied().cycle().take(len).collect())
    }

    pub fn rotated(&self, by: usize) -> Word {
        if self.0.is_empty() {
            return self.clone();
        }
        let mut v = self.0.clone();
        v.rotate_left(by % self.0.len());
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&s| s < 10) {
            for s in &self.0 {
                write!(f, "{s}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
            write!(f, "{}", parts.join("."))
        }
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl From<&str> for Word {
    fn from(s: &str) -> Self {
        Word::parse(s).expect("invalid word literal")
    }
}

fn is_primitive(s: &[u8]) -> bool {
    let q = s.len();
    (1..q).filter(|d| q.is_multiple_of(*d)).all(|d| s.chunks(d).any(|c| c != &s[..d]))
}

fn minimal_rotation(s: &[u8]) -> usize {
    let q = s.len();
    (0..q)
        .min_by(|&a, &b| {
            let ra = s[a..].iter().chain(&s[..a]);
            let rb = s[b..].iter().chain(&s[..b]);
            ra.cmp(rb)
        })
        .unwrap_or(0)
}

/// A primitive word in lexicographically minimal rotation: one periodic orbit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Necklace(Word);

impl Necklace {
    /// Accepts only words that are already primitive and rotation-minimal.
    pub fn new(word: Word) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::Input("a necklace has period at least 1".into()));
        }
        if !is_primitive(&word.0) {
            return Err(Error::Input(format!("word {word} is a proper power")));
        }
        if word.rotated(minimal_rotation(&word.0)) != word {
            return Err(Error::Input(format!("word {word} is not its minimal rotation")));
        }
        Ok(Necklace(word))
    }

    /// Rotates a primitive word into canonical form.
    pub fn canonical(word: Word) -> Result<Self> {
        if word.is_empty() || !is_primitive(&word.0) {
            return Err(Error::Input(format!("word {word} is not primitive")));
        }
        let r = minimal_rotation(&word.0);
        Ok(Necklace(word.rotated(r)))
    }

    pub fn period(&self) -> usize {
        self.0.len()
    }

    pub fn word(&self) -> &Word {
        &self.0
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0 .0
    }

    /// Digit complement `s -> k-1-s`, re-canonicalized.
    pub fn complement(&self, alphabet: usize) -> Necklace {
        let w = Word(self.symbols().iter().map(|&s| (alphabet - 1) as u8 - s).collect());
        Necklace::canonical(w).expect("complement of a primitive word is primitive")
    }

    /// Digit-sum, i.e. the number of ones for binary necklaces.
    pub fn digit_sum(&self) -> u64 {
        self.symbols().iter().map(|&s| s as u64).sum()
    }
}

impl fmt::Display for Necklace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for Necklace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// All primitive, cyclically admissible necklaces of period `<= max_period`,
/// ordered by period and then lexicographically.
pub fn enumerate_necklaces(system: &SymbolicSystem, max_period: usize) -> Result<Vec<Necklace>> {
    if max_period == 0 {
        return Err(Error::Precondition("max_period must be at least 1".into()));
    }
    let k = system.alphabet_size();
    let candidates = (k as u128).checked_pow(max_period as u32).unwrap_or(u128::MAX);
    system.budget().check_words(candidates)?;

    // Fredricksen–Kessler–Maiorana: Lyndon words of length <= n in lex order.
    let mut out = Vec::new();
    let mut w: Vec<i32> = vec![-1];
    let top = k as i32 - 1;
    while !w.is_empty() {
        *w.last_mut().unwrap() += 1;
        let m = w.len();
        let sym: Vec<u8> = w.iter().map(|&s| s as u8).collect();
        if system.is_cyclically_admissible(&sym) {
            out.push(Necklace(Word(sym)));
        }
        while w.len() < max_period {
            let s = w[w.len() - m];
            w.push(s);
        }
        while w.last() == Some(&top) {
            w.pop();
        }
    }
    out.sort_by(|a, b| a.period().cmp(&b.period()).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Christoffel word of slope `p/q` in necklace form:
/// `s_j = floor((j+1)p/q) - floor(jp/q)` for `j = 0..q`.
pub fn sturmian_word(p: u64, q: u64) -> Result<Necklace> {
    if q == 0 {
        return Err(Error::InvalidRotation { p, q, reason: "denominator must be positive" });
    }
    if p > q {
        return Err(Error::InvalidRotation { p, q, reason: "numerator exceeds denominator" });
    }
    if gcd(p, q) != 1 {
        return Err(Error::InvalidRotation { p, q, reason: "not in lowest terms" });
    }
    let sym: Vec<u8> = (0..q).map(|j| ((j + 1) * p / q - j * p / q) as u8).collect();
    Necklace::canonical(Word(sym))
}

/// Returns `(p, q)` when the binary necklace is the Sturmian word of slope `p/q`.
pub fn sturmian_slope(w: &Necklace) -> Option<(u64, u64)> {
    if w.symbols().iter().any(|&s| s > 1) {
        return None;
    }
    let q = w.period() as u64;
    let p = w.digit_sum();
    match sturmian_word(p, q) {
        Ok(s) if &s == w => Some((p, q)),
        _ => None,
    }
}

pub fn is_sturmian(w: &Necklace) -> bool {
    sturmian_slope(w).is_some()
}

/// A point `e^{2πit}` of the circle, stored as its angle `t ∈ [0, 1)`.
///
/// Periodic points of the doubling map are kept as exact fractions with
/// denominator `2^q - 1` so that orbit membership is decided without rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CirclePoint {
    Exact { num: u64, den: u64 },
    Float(f64),
}

impl CirclePoint {
    pub fn new(t: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Input(format!("angle {t} not in [0,1)")));
        }
        Ok(CirclePoint::Float(t))
    }

    pub fn exact(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num >= den {
            return Err(Error::Input(format!("angle {num}/{den} not in [0,1)")));
        }
        Ok(CirclePoint::Exact { num, den })
    }

    pub fn angle(&self) -> f64 {
        match *self {
            CirclePoint::Exact { num, den } => num as f64 / den as f64,
            CirclePoint::Float(t) => t,
        }
    }

    /// Image under `t -> 2t mod 1`.
    pub fn doubled(&self) -> CirclePoint {
        match *self {
            CirclePoint::Exact { num, den } => {
                let n = (num as u128 * 2 % den as u128) as u64;
                CirclePoint::Exact { num: n, den }
            }
            CirclePoint::Float(t) => {
                let d = 2.0 * t;
                CirclePoint::Float(if d >= 1.0 { d - 1.0 } else { d })
            }
        }
    }

    /// First binary digit of the angle (the symbol of the cylinder containing it).
    pub fn digit(&self) -> u8 {
        match *self {
            CirclePoint::Exact { num, den } => (2 * num as u128 >= den as u128) as u8,
            CirclePoint::Float(t) => (t >= 0.5) as u8,
        }
    }
}

/// Angles of the doubling-map orbit coded by a binary necklace:
/// `t_j = int(rotation_j(w)) / (2^q - 1)`.
pub fn orbit_angles(w: &Necklace) -> Result<Vec<CirclePoint>> {
    if w.symbols().iter().any(|&s| s > 1) {
        return Err(Error::Precondition("orbit angles need a binary necklace".into()));
    }
    let q = w.period();
    let mut out = Vec::with_capacity(q);
    if q <= 63 {
        let den = (1u64 << q) - 1;
        for j in 0..q {
            let num = w.word().rotated(j).0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
            out.push(if den == 1 {
                CirclePoint::Exact { num: 0, den: 1 }
            } else {
                CirclePoint::Exact { num: num % den, den }
            });
        }
    } else {
        for j in 0..q {
            let r = w.word().rotated(j);
            // Sum of the periodic binary expansion; 64 digits saturate f64 precision.
            let t: f64 = r.0.iter().cycle().take(64).enumerate().map(|(i, &b)| b as f64 * 0.5f64.powi(i as i32 + 1)).sum();
            out.push(CirclePoint::Float(if t >= 1.0 { 0.0 } else { t }));
        }
    }
    Ok(out)
}
