//! Rotation sets of vector observables: inner hulls of periodic averages,
//! outer envelopes from sampled support functions, the fish of the doubling
//! map and the homoclinic-sum certificate.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::birkhoff::{birkhoff_samples, periodic_average, Observable};
use crate::error::{Error, Result};
use crate::symdyn::{enumerate_necklaces, is_sturmian, Necklace, SymbolicSystem};

/// Points closer than this (max-norm) are treated as the same vertex.
pub const VERTEX_TOL: f64 = 1e-12;

/// Observable with values in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorObservable {
    components: Vec<Observable>,
    /// Joint constant: `|f(s) - f(t)|_2 <= L |s - t|` for circle observables.
    joint_lipschitz: Option<f64>,
}

impl VectorObservable {
    pub fn new(components: Vec<Observable>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::Input("vector observable needs a component".into()))?;
        if components.iter().any(|f| f.system() != first.system()) {
            return Err(Error::Input("components live on different systems".into()));
        }
        for f in &components {
            f.regime()?;
        }
        Ok(VectorObservable { components, joint_lipschitz: None })
    }

    pub fn with_joint_lipschitz(mut self, lipschitz: f64) -> Self {
        self.joint_lipschitz = Some(lipschitz);
        self
    }

    /// The circle inclusion `t -> (cos 2πt, sin 2πt)`.
    pub fn fish() -> Self {
        VectorObservable {
            components: vec![Observable::cos_angle(), Observable::sin_angle()],
            joint_lipschitz: Some(TAU),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Observable] {
        &self.components
    }

    pub fn system(&self) -> &SymbolicSystem {
        self.components[0].system()
    }

    /// `a·f + b`.
    pub fn affine(&self, scale: f64, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: offset.len() });
        }
        Ok(VectorObservable {
            components: self.components.iter().zip(offset).map(|(f, &b)| f.affine(scale, b)).collect(),
            joint_lipschitz: self.joint_lipschitz.map(|l| l * scale.abs()),
        })
    }

    /// Componentwise periodic average.
    pub fn periodic_average(&self, w: &Necklace) -> Result<Vec<f64>> {
        self.components.iter().map(|f| periodic_average(f, w)).collect()
    }
}

/// An extreme point of the inner hull with the periodic orbit realizing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerVertex {
    pub point: Vec<f64>,
    pub witness: Necklace,
    /// Whether the witness is a Sturmian necklace (binary systems only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sturmian: Option<bool>,
}

/// One sampled value of the outer support function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportSample {
    pub direction: Vec<f64>,
    pub bound: f64,
}

/// Inner hull and outer envelope of a rotation set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexApprox {
    pub dim: usize,
    pub inner: Vec<InnerVertex>,
    pub outer: Vec<SupportSample>,
    pub depth: usize,
    /// Largest difference between the outer bound and the inner support over sampled directions.
    pub hausdorff_gap: f64,
}

impl ConvexApprox {
    fn inner_support(&self, c: &[f64]) -> f64 {
        self.inner.iter().map(|v| dot(c, &v.point)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest `bound(c) - <c, v>` over sampled directions and inner vertices.
    pub fn containment_slack(&self) -> f64 {
        self.outer.iter().map(|s| s.bound - self.inner_support(&s.direction)).fold(f64::INFINITY, f64::min)
    }

    /// CSV with one row per inner vertex followed by one row per direction.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let coords: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        let _ = writeln!(out, "kind,{},period,word,sturmian", coords.join(","));
        for v in &self.inner {
            let xs: Vec<String> = v.point.iter().map(|x| format!("{x:?}")).collect();
            let st = v.sturmian.map(|b| b.to_string()).unwrap_or_default();
            let _ = writeln!(out, "vertex,{},{},{},{}", xs.join(","), v.witness.period(), v.witness, st);
        }
        let dirs: Vec<String> = (0..self.dim).map(|i| format!("c{i}")).collect();
        let _ = writeln!(out, "kind,{},bound", dirs.join(","));
        for s in &self.outer {
            let cs: Vec<String> = s.direction.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "direction,{},{:?}", cs.join(","), s.bound);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `n` unit directions: `±1` for `d = 1`, uniform angles for `d = 2`,
/// a Fibonacci lattice for `d = 3`.
pub fn default_directions(dim: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    match dim {
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 => {
            if n < 4 {
                return Err(Error::Precondition("at least 4 directions are needed".into()));
            }
            Ok((0..n).map(|i| {
                let a = TAU * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect())
        }
        3 => {
            if n < 4 {
                return Err(Error::Precondition("at least 4 directions are needed".into()));
            }
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect())
        }
        _ => Err(Error::Precondition(format!("no default directions in dimension {dim}; supply them explicitly"))),
    }
}

/// All periodic averages with period up to `max_period`, in enumeration order.
fn periodic_points(f: &VectorObservable, max_period: usize) -> Result<Vec<(Vec<f64>, Necklace)>> {
    if max_period == 0 {
        return Err(Error::Precondition("max_period must be at least 1".into()));
    }
    enumerate_necklaces(f.system(), max_period)?
        .into_iter()
        .map(|w| Ok((f.periodic_average(&w)?, w)))
        .collect()
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Indices of the strict extreme points of a planar point set, counterclockwise.
fn hull_2d(points: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(points[a][1].total_cmp(&points[b][1])));
    idx.dedup_by(|a, b| {
        let (p, q) = (&points[*a], &points[*b]);
        (p[0] - q[0]).abs() <= VERTEX_TOL && (p[1] - q[1]).abs() <= VERTEX_TOL
    });
    if idx.len() <= 2 {
        return idx;
    }
    let mut chain: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = chain.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
        for &i in iter {
            while chain.len() >= start + 2
                && cross(&points[chain[chain.len() - 2]], &points[chain[chain.len() - 1]], &points[i]) <= VERTEX_TOL
            {
                chain.pop();
            }
            chain.push(i);
        }
        chain.pop();
    }
    chain
}

fn reduce_by_directions(points: &[Vec<f64>], directions: &[Vec<f64>]) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    for c in directions {
        let best = points.iter().map(|p| dot(c, p)).fold(f64::NEG_INFINITY, f64::max);
        let i = points.iter().position(|p| dot(c, p) >= best - VERTEX_TOL).expect("nonempty");
        if !keep.contains(&i) {
            keep.push(i);
        }
    }
    keep
}

fn with_witnesses(points: &[(Vec<f64>, Necklace)], chosen: Vec<usize>, binary: bool) -> Vec<InnerVertex> {
    let mut out: Vec<InnerVertex> = Vec::new();
    for i in chosen {
        let p = &points[i].0;
        // Among coincident points the first in (period, lex) order wins.
        let witness = points
            .iter()
            .find(|(q, _)| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= VERTEX_TOL))
            .map(|(_, w)| w.clone())
            .expect("point is in the set");
        if out.iter().any(|v| v.point.iter().zip(p).all(|(a, b)| (a - b).abs() <= VERTEX_TOL)) {
            continue;
        }
        let sturmian = binary.then(|| is_sturmian(&witness));
        out.push(InnerVertex { point: p.clone(), witness, sturmian });
    }
    out
}

/// Extreme points of the convex hull of periodic averages up to
/// `max_period`, each with a witness orbit. Exact in dimensions 1 and 2;
/// in dimension 3 and above only points maximizing a sampled direction are kept.
pub fn rotation_inner(f: &VectorObservable, max_period: usize) -> Result<Vec<InnerVertex>> {
    let directions = match f.dim() {
        1 | 2 => Vec::new(),
        d => default_directions(d, 256)?,
    };
    rotation_inner_with(f, max_period, &directions)
}

/// [`rotation_inner`] with explicit directions for the reduction in dimension 3 and above.
pub fn rotation_inner_with(f: &VectorObservable, max_period: usize, directions: &[Vec<f64>]) -> Result<Vec<InnerVertex>> {
    let pts = periodic_points(f, max_period)?;
    let coords: Vec<Vec<f64>> = pts.iter().map(|(p, _)| p.clone()).collect();
    let chosen = match f.dim() {
        1 => {
            let lo = (0..coords.len()).min_by(|&a, &b| coords[a][0].total_cmp(&coords[b][0])).expect("nonempty");
            let hi = (0..coords.len()).max_by(|&a, &b| coords[a][0].total_cmp(&coords[b][0]).then(b.cmp(&a))).expect("nonempty");
            vec![lo, hi]
        }
        2 => hull_2d(&coords),
        d => {
            if directions.iter().any(|c| c.len() != d) || directions.is_empty() {
                return Err(Error::Dimension { expected: d, got: directions.first().map_or(0, |c| c.len()) });
            }
            reduce_by_directions(&coords, directions)
        }
    };
    Ok(with_witnesses(&pts, chosen, f.system().alphabet_size() == 2))
}

/// Support-function upper bounds `(1/depth) sup <c, f^{(depth)}>` for each
/// direction; exact over cylinders for locally constant components,
/// Lipschitz-corrected on a dyadic grid for circle components.
pub fn rotation_outer(f: &VectorObservable, depth: usize, directions: &[Vec<f64>]) -> Result<Vec<SupportSample>> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let d = f.dim();
    if let Some(c) = directions.iter().find(|c| c.len() != d) {
        return Err(Error::Dimension { expected: d, got: c.len() });
    }
    let refs: Vec<&Observable> = f.components.iter().collect();
    let samples = birkhoff_samples(&refs, depth)?;
    Ok(directions
        .par_iter()
        .map(|c| {
            let max = samples.sums.iter().map(|row| dot(c, row)).fold(f64::NEG_INFINITY, f64::max);
            let err = match f.joint_lipschitz {
                Some(l) if samples.error_per_lipschitz > 0.0 => {
                    c.iter().map(|x| x * x).sum::<f64>().sqrt() * l * samples.error_per_lipschitz
                }
                _ => c.iter().zip(&samples.errors).map(|(x, e)| x.abs() * e).sum(),
            };
            SupportSample { direction: c.clone(), bound: (max + err) / depth as f64 }
        })
        .collect())
}

/// Inner hull and outer envelope together.
pub fn rotation_approx(f: &VectorObservable, max_period: usize, depth: usize, directions: &[Vec<f64>]) -> Result<ConvexApprox> {
    let inner = rotation_inner_with(f, max_period, directions)?;
    let outer = rotation_outer(f, depth, directions)?;
    let mut approx = ConvexApprox { dim: f.dim(), inner, outer, depth, hausdorff_gap: 0.0 };
    approx.hausdorff_gap = approx
        .outer
        .iter()
        .map(|s| s.bound - approx.inner_support(&s.direction))
        .fold(0.0, f64::max);
    Ok(approx)
}

/// Default number of sampled directions for the fish.
pub const FISH_DIRECTIONS: usize = 64;

/// Rotation set of the circle inclusion under the doubling map.
pub fn fish_approx(max_period: usize, depth: usize) -> Result<ConvexApprox> {
    fish_approx_with(max_period, depth, FISH_DIRECTIONS)
}

pub fn fish_approx_with(max_period: usize, depth: usize, directions: usize) -> Result<ConvexApprox> {
    rotation_approx(&VectorObservable::fish(), max_period, depth, &default_directions(2, directions)?)
}

/// Partial sum of the displacements of the homoclinic orbit `z_n = e^{2πi/2^n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomoclinicCertificate {
    pub n_max: usize,
    pub re: f64,
    pub im: f64,
    /// Bound on the modulus of the omitted terms.
    pub tail: f64,
    /// `Im(S) > tail`, so the full sum is nonzero.
    pub nonzero: bool,
}

impl HomoclinicCertificate {
    pub fn sum(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `S = Σ_{n=1}^{n_max} (e^{2πi/2^n} - 1)` with tail bound `2π·2^{-n_max}`.
pub fn homoclinic_sum(n_max: usize) -> Result<HomoclinicCertificate> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    let mut s = Complex64::new(0.0, 0.0);
    for n in 1..=n_max {
        let a = TAU / 2f64.powi(n as i32);
        // e^{ia} - 1 = -2 sin²(a/2) + i sin a, without cancellation for small a.
        s += Complex64::new(-2.0 * (a / 2.0).sin().powi(2), a.sin());
    }
    let tail = TAU * 2f64.powi(-(n_max as i32));
    Ok(HomoclinicCertificate { n_max, re: s.re, im: s.im, tail, nonzero: s.im > tail })
}
