//! Matrix geometry: Cartan and Jordan projections, majorization, Weyl-group
//! hulls, and the space of positive-definite matrices with its vectorial
//! distance, geodesics and midpoints.
//!
//! Positive-definite points are stored through a square factor `X` with
//! `p = X Xᵀ` together with the exact value of `log det p`. Every operation
//! (action, distance, geodesic) is carried out on factors, so the condition
//! number that enters a decomposition is the square root of the condition
//! number of `p`, and the smallest singular value is recovered from the
//! tracked determinant.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Tolerance used when comparing prefix sums in majorization checks.
pub const MAJORIZATION_TOL: f64 = 1e-9;

const CHAMBER_TOL: f64 = 1e-12;
const EIGEN_FLOOR: f64 = 1e-300;

/// A weakly decreasing real vector: a point of the positive chamber.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamberVector(Vec<f64>);

impl ChamberVector {
    /// Accepts vectors that are weakly decreasing up to `1e-12`, then sorts.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input(format!("non-finite chamber vector {v:?}")));
        }
        if v.windows(2).any(|p| p[1] > p[0] + CHAMBER_TOL) {
            return Err(Error::OutOfChamber(v));
        }
        Ok(Self::sorted(v))
    }

    /// Canonical sort into decreasing order.
    pub fn sorted(mut v: Vec<f64>) -> Self {
        v.sort_by(|a, b| b.total_cmp(a));
        ChamberVector(v)
    }

    pub fn zeros(d: usize) -> Self {
        ChamberVector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, s: f64) -> ChamberVector {
        let mut v: Vec<f64> = self.0.iter().map(|x| x * s).collect();
        if s < 0.0 {
            v.reverse();
        }
        ChamberVector(v)
    }

    pub fn add(&self, other: &ChamberVector) -> Result<ChamberVector> {
        check_dims(self.dim(), other.dim())?;
        Ok(ChamberVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn dot(&self, c: &[f64]) -> f64 {
        self.0.iter().zip(c).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &ChamberVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Serialize for ChamberVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl fmt::Display for ChamberVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

fn check_square(g: &Mat) -> Result<usize> {
    check_dims(g.nrows(), g.ncols())?;
    if g.nrows() == 0 {
        return Err(Error::Input("empty matrix".into()));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotInvertible);
    }
    Ok(g.nrows())
}

/// Left singular vectors and singular values, decreasing, by one-sided
/// Jacobi rotations on the columns of `g`. Used instead of the bidiagonal
/// SVD of nalgebra 0.35, which returns wrong values for some well-conditioned
/// 3×3 inputs; Jacobi also keeps small singular values to relative accuracy.
pub fn jacobi_svd(g: &Mat) -> (Mat, Vec<f64>) {
    let (rows, d) = g.shape();
    let mut a = g.clone();
    for _ in 0..64 {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = c * x - s * y;
                    a[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..d).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let u = Mat::from_fn(rows, d, |i, j| {
        let k = order[j];
        if norms[k] > 0.0 { a[(i, k)] / norms[k] } else { 0.0 }
    });
    (u, order.iter().map(|&k| norms[k]).collect())
}

/// Log singular values in decreasing order, with no determinant correction.
fn log_singular_values(g: &Mat) -> Result<Vec<f64>> {
    check_square(g)?;
    let (_, sv) = jacobi_svd(g);
    let mut v: Vec<f64> = sv.iter().map(|s| s.ln()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotInvertible);
    }
    Ok(v)
}

/// Like [`log_singular_values`] but a smallest value lost to rounding is
/// recovered from `log|det g|`.
fn log_singular_values_with_det(g: &Mat, log_abs_det: f64) -> Result<Vec<f64>> {
    check_square(g)?;
    if !log_abs_det.is_finite() {
        return Err(Error::NotInvertible);
    }
    let (_, sv) = jacobi_svd(g);
    let mut v: Vec<f64> = sv.iter().map(|s| s.max(f64::MIN_POSITIVE).ln()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    fix_last_by_sum(&mut v, log_abs_det);
    Ok(v)
}

/// Replaces the last (least accurate) entry of a decreasing vector by the
/// value forced by the known total, when that value keeps the ordering.
fn fix_last_by_sum(v: &mut [f64], total: f64) {
    let d = v.len();
    if d >= 2 && total.is_finite() {
        let last = total - v[..d - 1].iter().sum::<f64>();
        if last <= v[d - 2] {
            v[d - 1] = last;
        }
    }
}

/// [`fix_last_by_sum`] for a vector in arbitrary order: the smallest entry
/// is replaced in place, so positions keep matching e.g. singular vectors.
fn fix_smallest_by_sum(v: &mut [f64], total: f64) {
    let d = v.len();
    if d < 2 || !total.is_finite() {
        return;
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| v[j].total_cmp(&v[i]));
    let (min, next) = (order[d - 1], order[d - 2]);
    let value = total - order[..d - 1].iter().map(|&i| v[i]).sum::<f64>();
    if value <= v[next] {
        v[min] = value;
    }
}

fn det_corrected(mut v: Vec<f64>, log_abs_det: f64) -> Vec<f64> {
    fix_last_by_sum(&mut v, log_abs_det);
    v
}

/// Cartan projection: logarithms of the singular values, decreasing.
pub fn cartan(g: &Mat) -> Result<ChamberVector> {
    Ok(ChamberVector(log_singular_values(g)?))
}

/// Cartan projection when `log|det g|` is known independently (e.g. for
/// long products). The smallest singular value is taken from the determinant.
pub fn cartan_with_log_det(g: &Mat, log_abs_det: f64) -> Result<ChamberVector> {
    Ok(ChamberVector(log_singular_values_with_det(g, log_abs_det)?))
}

fn log_eigen_moduli(g: &Mat, floor: bool) -> Result<Vec<f64>> {
    check_square(g)?;
    let ev = g.complex_eigenvalues();
    let lo = if floor { f64::MIN_POSITIVE } else { 0.0 };
    let mut v: Vec<f64> = ev.iter().map(|z| z.norm().max(lo).ln()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotInvertible);
    }
    Ok(v)
}

/// Jordan projection: logarithms of the eigenvalue moduli, decreasing.
pub fn jordan(g: &Mat) -> Result<ChamberVector> {
    Ok(ChamberVector(log_eigen_moduli(g, false)?))
}

pub fn jordan_with_log_det(g: &Mat, log_abs_det: f64) -> Result<ChamberVector> {
    if !log_abs_det.is_finite() {
        return Err(Error::NotInvertible);
    }
    Ok(ChamberVector(det_corrected(log_eigen_moduli(g, true)?, log_abs_det)))
}

/// `log|det g|` via LU.
pub fn log_abs_det(g: &Mat) -> Result<f64> {
    check_square(g)?;
    let d = g.clone().lu().determinant().abs().ln();
    if !d.is_finite() {
        return Err(Error::NotInvertible);
    }
    Ok(d)
}

/// Worst slack of `xi ≼ eta`: the minimum over `i < d` of the prefix-sum
/// margins of the decreasing rearrangements, and minus the total-sum
/// mismatch. Nonnegative (up to tolerance) iff `xi` is majorized by `eta`.
pub fn majorization_slack(xi: &[f64], eta: &[f64]) -> Result<f64> {
    check_dims(eta.len(), xi.len())?;
    let mut a = xi.to_vec();
    let mut b = eta.to_vec();
    a.sort_by(|x, y| y.total_cmp(x));
    b.sort_by(|x, y| y.total_cmp(x));
    let d = a.len();
    let (mut sa, mut sb) = (0.0, 0.0);
    let mut slack = f64::INFINITY;
    for i in 0..d {
        sa += a[i];
        sb += b[i];
        if i + 1 < d {
            slack = slack.min(sb - sa);
        }
    }
    slack = slack.min(-(sb - sa).abs());
    Ok(slack)
}

/// Answers `xi ≼ eta` with the fixed absolute tolerance `1e-9`.
pub fn majorizes(eta: &[f64], xi: &[f64]) -> Result<bool> {
    Ok(majorization_slack(xi, eta)? >= -MAJORIZATION_TOL)
}

/// `(ξ_1, …, ξ_d) -> (-ξ_d, …, -ξ_1)`.
pub fn opposition(xi: &ChamberVector) -> ChamberVector {
    ChamberVector(xi.0.iter().rev().map(|x| -x).collect())
}

/// A subset of `{1, …, d-1}`; index `i` stands for the wall `ξ_i = ξ_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ThetaSet {
    dim: usize,
    indices: BTreeSet<usize>,
}

impl ThetaSet {
    pub fn new(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let indices: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i >= dim) {
            return Err(Error::Input(format!("theta index {bad} outside 1..={}", dim.saturating_sub(1))));
        }
        Ok(ThetaSet { dim, indices })
    }

    pub fn empty(dim: usize) -> Self {
        ThetaSet { dim, indices: BTreeSet::new() }
    }

    pub fn full(dim: usize) -> Self {
        ThetaSet { dim, indices: (1..dim).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() + 1 == self.dim.max(1)
    }

    /// Coordinate blocks (0-based ranges) permuted by the subgroup generated
    /// by the transpositions `(i, i+1)`, `i ∈ Θ`.
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.dim {
            if i == self.dim || !self.contains(i) {
                out.push(start..i);
                start = i;
            }
        }
        out
    }
}

impl Serialize for ThetaSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.indices.iter())
    }
}

/// Support value `max ⟨c, w ξ⟩` over `ξ ∈ points` and `w ∈ W_Θ`, i.e. the
/// support function of `co(W_Θ · points)` in the direction `c`.
///
/// Within each block the maximum over permutations pairs the sorted entries
/// of `c` with the sorted entries of `ξ`.
pub fn theta_hull_support(points: &[ChamberVector], theta: &ThetaSet, direction: &[f64]) -> Result<f64> {
    let d = theta.dim();
    check_dims(d, direction.len())?;
    let blocks = theta.blocks();
    let mut best = f64::NEG_INFINITY;
    let mut cs: Vec<f64> = Vec::with_capacity(d);
    let mut xs: Vec<f64> = Vec::with_capacity(d);
    for p in points {
        check_dims(d, p.dim())?;
        if p.0.windows(2).any(|w| w[1] > w[0] + CHAMBER_TOL) {
            return Err(Error::OutOfChamber(p.0.clone()));
        }
        let mut val = 0.0;
        for b in &blocks {
            if b.len() == 1 {
                val += direction[b.start] * p.0[b.start];
                continue;
            }
            cs.clear();
            xs.clear();
            cs.extend_from_slice(&direction[b.clone()]);
            xs.extend_from_slice(&p.0[b.clone()]);
            cs.sort_by(|a, b| b.total_cmp(a));
            xs.sort_by(|a, b| b.total_cmp(a));
            val += cs.iter().zip(&xs).map(|(a, b)| a * b).sum::<f64>();
        }
        best = best.max(val);
    }
    Ok(best)
}

/// A positive-definite symmetric matrix, read as an inner product.
#[derive(Debug, Clone)]
pub struct SpdPoint {
    factor: Mat,
    log_det: f64,
}

impl SpdPoint {
    /// The reference point `o` (identity matrix).
    pub fn identity(d: usize) -> Self {
        SpdPoint { factor: Mat::identity(d, d), log_det: 0.0 }
    }

    /// Validates symmetry (relative `1e-12`) and positivity.
    pub fn new(p: Mat) -> Result<Self> {
        check_square(&p)?;
        let scale = p.amax().max(1.0);
        if (&p - p.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Input("matrix is not symmetric".into()));
        }
        let sym = (&p + p.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Indefinite);
        }
        let sqrt = Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let factor = &eig.eigenvectors * sqrt;
        let log_det = eig.eigenvalues.iter().map(|l| l.ln()).sum();
        Ok(SpdPoint { factor, log_det })
    }

    /// Point `X Xᵀ` from a square invertible factor `X` with known `log|det X|`.
    pub(crate) fn from_factor(factor: Mat, log_abs_det_factor: f64) -> Self {
        SpdPoint { factor, log_det: 2.0 * log_abs_det_factor }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Indefinite);
        }
        let factor = Mat::from_diagonal(&nalgebra::DVector::from_iterator(diag.len(), diag.iter().map(|x| x.sqrt())));
        Ok(SpdPoint { factor, log_det: diag.iter().map(|x| x.ln()).sum() })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &Mat {
        &self.factor
    }

    /// `log det p`, tracked exactly through all operations.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn matrix(&self) -> Mat {
        let p = &self.factor * self.factor.transpose();
        (&p + p.transpose()) * 0.5
    }

    /// Left singular vectors and log singular values of the factor (so the
    /// eigenvectors and half log-eigenvalues of `p`).
    fn factor_svd(&self) -> (Mat, Vec<f64>) {
        let (u, sv) = jacobi_svd(&self.factor);
        let mut logs: Vec<f64> = sv.iter().map(|s| s.max(EIGEN_FLOOR).ln()).collect();
        fix_smallest_by_sum(&mut logs, 0.5 * self.log_det);
        (u, logs)
    }

    /// Log eigenvalues of `p`, decreasing.
    pub fn log_eigenvalues(&self) -> ChamberVector {
        let (_, half) = self.factor_svd();
        ChamberVector::sorted(half.iter().map(|x| 2.0 * x).collect())
    }

    /// Condition number of `p` on a log scale.
    pub fn log_condition(&self) -> f64 {
        let l = self.log_eigenvalues();
        l.0[0] - l.0[l.dim() - 1]
    }

    /// Symmetric power `p^s` via the eigendecomposition, as a point.
    pub fn power(&self, s: f64) -> SpdPoint {
        let (u, half) = self.factor_svd();
        let scale = nalgebra::DVector::from_iterator(half.len(), half.iter().map(|h| (s * h).exp()));
        SpdPoint { factor: u * Mat::from_diagonal(&scale), log_det: s * self.log_det }
    }

    /// The symmetric matrix `p^s`.
    pub fn power_matrix(&self, s: f64) -> Mat {
        let (u, half) = self.factor_svd();
        let scale = nalgebra::DVector::from_iterator(half.len(), half.iter().map(|h| (2.0 * s * h).exp()));
        let m = &u * Mat::from_diagonal(&scale) * u.transpose();
        (&m + m.transpose()) * 0.5
    }

    pub fn sqrt_matrix(&self) -> Mat {
        self.power_matrix(0.5)
    }

    pub fn inv_sqrt_matrix(&self) -> Mat {
        self.power_matrix(-0.5)
    }

    /// `X^{-1} Y` for the factors of `self` and `other`, with its `log|det|`.
    fn relative_factor(&self, other: &SpdPoint) -> Result<(Mat, f64)> {
        check_dims(self.dim(), other.dim())?;
        let z = self.factor.clone().lu().solve(&other.factor).ok_or(Error::NotInvertible)?;
        Ok((z, 0.5 * (other.log_det - self.log_det)))
    }
}

/// Group action `g * p = g p gᵀ`.
pub fn act(g: &Mat, p: &SpdPoint) -> Result<SpdPoint> {
    let ld = log_abs_det(g)?;
    act_with_log_det(g, ld, p)
}

/// Group action with `log|det g|` supplied by the caller.
pub fn act_with_log_det(g: &Mat, log_abs_det_g: f64, p: &SpdPoint) -> Result<SpdPoint> {
    check_dims(p.dim(), g.nrows())?;
    check_dims(p.dim(), g.ncols())?;
    Ok(SpdPoint { factor: g * &p.factor, log_det: p.log_det + 2.0 * log_abs_det_g })
}

/// Vectorial distance `2 σ(p^{-1/2} q^{1/2})`.
pub fn vdist(p: &SpdPoint, q: &SpdPoint) -> Result<ChamberVector> {
    let (z, ld) = p.relative_factor(q)?;
    Ok(cartan_with_log_det(&z, ld)?.scaled(2.0))
}

/// Point at parameter `s` on the geodesic from `p` to `q`:
/// `p^{1/2} (p^{-1/2} q p^{-1/2})^s p^{1/2}`.
pub fn geodesic(p: &SpdPoint, q: &SpdPoint, s: f64) -> Result<SpdPoint> {
    let (z, ld) = p.relative_factor(q)?;
    let (u, sv) = jacobi_svd(&z);
    let mut logs: Vec<f64> = sv.iter().map(|x| x.max(EIGEN_FLOOR).ln()).collect();
    fix_smallest_by_sum(&mut logs, ld);
    let d = logs.len();
    let scale = nalgebra::DVector::from_iterator(d, logs.iter().map(|l| (s * l).exp()));
    let factor = &p.factor * u * Mat::from_diagonal(&scale);
    Ok(SpdPoint { factor, log_det: p.log_det + s * (q.log_det - p.log_det) })
}

/// Geodesic midpoint. The better-conditioned endpoint is used as base point.
pub fn midpoint(p: &SpdPoint, q: &SpdPoint) -> Result<SpdPoint> {
    if p.log_condition() <= q.log_condition() {
        geodesic(p, q, 0.5)
    } else {
        geodesic(q, p, 0.5)
    }
}
