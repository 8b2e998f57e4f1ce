//! Extended-precision kernel for small dense matrices and positive-definite
//! points, used where metric tables become too anisotropic for `f64`.
//!
//! The kernel is generic over [`Real`]: double-double for speed, and binary
//! floats of a chosen width when double-double runs out.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use dashu_base::SquareRoot;
use dashu_float::{round::mode::HalfEven, FBig};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::matgeo::Mat;

pub(crate) trait Real:
    Clone + Debug + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    /// Unit roundoff of the representation.
    fn epsilon(bits: usize) -> f64;
    fn lift(x: f64, bits: usize) -> Self;
    fn lower(&self) -> f64;
    fn root(&self) -> Self;
}

impl Real for TwoFloat {
    fn epsilon(_: usize) -> f64 {
        1e-32
    }

    fn lift(x: f64, _: usize) -> Self {
        TwoFloat::from(x)
    }

    fn lower(&self) -> f64 {
        f64::from(*self)
    }

    fn root(&self) -> Self {
        self.sqrt()
    }
}

pub(crate) type BigFloat = FBig<HalfEven, 2>;

impl Real for BigFloat {
    fn epsilon(bits: usize) -> f64 {
        (-(bits as f64)).exp2()
    }

    fn lift(x: f64, bits: usize) -> Self {
        BigFloat::try_from(x).expect("finite input").with_precision(bits).value()
    }

    fn lower(&self) -> f64 {
        self.to_f64().value()
    }

    fn root(&self) -> Self {
        SquareRoot::sqrt(self)
    }
}

/// Square matrix, row-major, carrying the working precision.
#[derive(Debug, Clone)]
pub(crate) struct DMat<R> {
    d: usize,
    bits: usize,
    a: Vec<R>,
}

impl<R: Real> DMat<R> {
    fn zero(&self) -> R {
        R::lift(0.0, self.bits)
    }

    pub fn identity(d: usize, bits: usize) -> Self {
        let a = (0..d * d).map(|k| R::lift(if k % (d + 1) == 0 { 1.0 } else { 0.0 }, bits)).collect();
        DMat { d, bits, a }
    }

    pub fn from_mat(m: &Mat, bits: usize) -> Self {
        let d = m.nrows();
        DMat { d, bits, a: (0..d * d).map(|k| R::lift(m[(k / d, k % d)], bits)).collect() }
    }

    pub fn to_mat(&self) -> Mat {
        Mat::from_fn(self.d, self.d, |i, j| self.at(i, j).lower())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> &R {
        &self.a[i * self.d + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: R) {
        self.a[i * self.d + j] = v;
    }

    pub fn mul(&self, other: &DMat<R>) -> DMat<R> {
        let d = self.d;
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut s = self.at(i, 0).clone() * other.at(0, j).clone();
                for k in 1..d {
                    s = s + self.at(i, k).clone() * other.at(k, j).clone();
                }
                out.push(s);
            }
        }
        DMat { d, bits: self.bits, a: out }
    }

    pub fn transpose(&self) -> DMat<R> {
        let d = self.d;
        DMat { d, bits: self.bits, a: (0..d * d).map(|k| self.at(k % d, k / d).clone()).collect() }
    }

    pub fn scale_columns(&self, s: &[R]) -> DMat<R> {
        let d = self.d;
        DMat { d, bits: self.bits, a: (0..d * d).map(|k| self.a[k].clone() * s[k % d].clone()).collect() }
    }

    fn scale(&self, s: f64) -> DMat<R> {
        let s = R::lift(s, self.bits);
        DMat { d: self.d, bits: self.bits, a: self.a.iter().map(|x| x.clone() * s.clone()).collect() }
    }

    fn max_abs(&self) -> f64 {
        self.a.iter().map(|x| x.lower().abs()).fold(0.0, f64::max)
    }

    /// `self^{-1} b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &DMat<R>) -> Result<DMat<R>> {
        let d = self.d;
        let mut a = self.clone();
        let mut x = b.clone();
        for c in 0..d {
            let p = (c..d).max_by(|&i, &j| a.at(i, c).lower().abs().total_cmp(&a.at(j, c).lower().abs())).expect("nonempty");
            let piv = a.at(p, c).clone();
            if piv.lower() == 0.0 || !piv.lower().is_finite() {
                return Err(Error::NotInvertible);
            }
            if p != c {
                for j in 0..d {
                    a.a.swap(p * d + j, c * d + j);
                    x.a.swap(p * d + j, c * d + j);
                }
            }
            for r in c + 1..d {
                let l = a.at(r, c).clone() / piv.clone();
                for j in c..d {
                    let v = a.at(r, j).clone() - l.clone() * a.at(c, j).clone();
                    a.set(r, j, v);
                }
                for j in 0..d {
                    let v = x.at(r, j).clone() - l.clone() * x.at(c, j).clone();
                    x.set(r, j, v);
                }
            }
        }
        for c in (0..d).rev() {
            for j in 0..d {
                let mut v = x.at(c, j).clone();
                for k in c + 1..d {
                    v = v - a.at(c, k).clone() * x.at(k, j).clone();
                }
                x.set(c, j, v / a.at(c, c).clone());
            }
        }
        if x.a.iter().any(|v| !v.lower().is_finite()) {
            return Err(Error::NotInvertible);
        }
        Ok(x)
    }

    /// Left singular vectors (columns) and singular values, decreasing, by
    /// one-sided Jacobi rotations, which keep relative accuracy on graded
    /// matrices.
    pub fn svd(&self) -> (DMat<R>, Vec<R>) {
        const SWEEPS: usize = 80;
        let d = self.d;
        let tol = 4.0 * R::epsilon(self.bits);
        let one = R::lift(1.0, self.bits);
        let mut w = self.clone();
        for _ in 0..SWEEPS {
            let mut rotated = false;
            for i in 0..d {
                for j in i + 1..d {
                    let (mut alpha, mut beta, mut gamma) = (self.zero(), self.zero(), self.zero());
                    for r in 0..d {
                        let (x, y) = (w.at(r, i).clone(), w.at(r, j).clone());
                        alpha = alpha + x.clone() * x.clone();
                        beta = beta + y.clone() * y.clone();
                        gamma = gamma + x * y;
                    }
                    let g = gamma.lower();
                    if g == 0.0 || g.abs() <= tol * alpha.lower().sqrt() * beta.lower().sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (gamma * R::lift(2.0, self.bits));
                    let z = zeta.lower();
                    let t = if z.abs() > 1e100 {
                        one.clone() / (zeta * R::lift(2.0, self.bits))
                    } else {
                        let mag = if z < 0.0 { -zeta.clone() } else { zeta.clone() };
                        let t = one.clone() / (mag + (one.clone() + zeta.clone() * zeta).root());
                        if z < 0.0 { -t } else { t }
                    };
                    let c = one.clone() / (one.clone() + t.clone() * t.clone()).root();
                    let s = c.clone() * t;
                    for r in 0..d {
                        let (x, y) = (w.at(r, i).clone(), w.at(r, j).clone());
                        w.set(r, i, c.clone() * x.clone() - s.clone() * y.clone());
                        w.set(r, j, s.clone() * x + c.clone() * y);
                    }
                }
            }
            // A single pair is orthogonal after one rotation.
            if !rotated || d == 2 {
                break;
            }
        }
        let mut cols: Vec<(R, usize)> = (0..d)
            .map(|j| {
                let n2 = (1..d).fold(w.at(0, j).clone() * w.at(0, j).clone(), |acc, r| acc + w.at(r, j).clone() * w.at(r, j).clone());
                (n2.root(), j)
            })
            .collect();
        cols.sort_by(|a, b| b.0.lower().total_cmp(&a.0.lower()));
        let mut u = DMat { d, bits: self.bits, a: vec![self.zero(); d * d] };
        for (k, (s, j)) in cols.iter().enumerate() {
            for r in 0..d {
                u.set(r, k, if s.lower() > 0.0 { w.at(r, *j).clone() / s.clone() } else { self.zero() });
            }
        }
        (u, cols.into_iter().map(|c| c.0).collect())
    }
}

/// Product of letter matrices kept as `mantissa · e^{log_scale}`.
#[derive(Debug, Clone)]
pub(crate) struct DProduct<R> {
    pub m: DMat<R>,
    pub log_scale: f64,
}

impl<R: Real> DProduct<R> {
    pub fn identity(d: usize, bits: usize) -> Self {
        DProduct { m: DMat::identity(d, bits), log_scale: 0.0 }
    }

    pub fn left_mul(&self, a: &DMat<R>) -> Self {
        let mut m = a.mul(&self.m);
        let e = m.max_abs().log2().round();
        let mut log_scale = self.log_scale;
        if e.is_finite() && e != 0.0 {
            m = m.scale((-e).exp2());
            log_scale += e * std::f64::consts::LN_2;
        }
        DProduct { m, log_scale }
    }
}

/// `p = X Xᵀ` with `log det p` tracked separately in `f64`.
#[derive(Debug, Clone)]
pub(crate) struct DPoint<R> {
    pub x: DMat<R>,
    pub log_det: f64,
}

/// Allowed relative mismatch between computed and tracked `log|det|`
/// before the working precision is considered exhausted.
pub(crate) const PRECISION_GUARD: f64 = 1e-10;

impl<R: Real> DPoint<R> {
    pub fn identity(d: usize, bits: usize) -> Self {
        DPoint { x: DMat::identity(d, bits), log_det: 0.0 }
    }

    pub fn act(&self, g: &DMat<R>, log_abs_det_g: f64) -> DPoint<R> {
        DPoint { x: g.mul(&self.x), log_det: self.log_det + 2.0 * log_abs_det_g }
    }

    /// `X^{-1} Y` with its tracked `log|det|`.
    fn relative(&self, other: &DPoint<R>) -> Result<(DMat<R>, f64)> {
        Ok((self.x.solve(&other.x)?, 0.5 * (other.log_det - self.log_det)))
    }

    /// Geodesic midpoint `X U S^{1/2}` where `X^{-1} Y = U S Vᵀ`.
    pub fn midpoint(&self, other: &DPoint<R>) -> Result<DPoint<R>> {
        let (z, ld) = self.relative(other)?;
        let (u, s) = z.svd();
        check_log_det(&s, 0.0, ld)?;
        let half: Vec<R> = s.iter().map(|v| v.root()).collect();
        Ok(DPoint { x: self.x.mul(&u.scale_columns(&half)), log_det: 0.5 * (self.log_det + other.log_det) })
    }

    /// Vectorial distance `2 log s(X^{-1} Y)`.
    pub fn vdist(&self, other: &DPoint<R>) -> Result<Vec<f64>> {
        let (z, ld) = self.relative(other)?;
        log_singular_values(&z, 0.0, ld).map(|v| v.into_iter().map(|x| 2.0 * x).collect())
    }

    /// `(p^{1/2}, p^{-1/2})` as symmetric matrices.
    pub fn half_powers(&self) -> (DMat<R>, DMat<R>) {
        let (u, s) = self.x.svd();
        let one = R::lift(1.0, self.x.bits);
        let inv: Vec<R> = s.iter().map(|v| one.clone() / v.clone()).collect();
        let ut = u.transpose();
        (u.scale_columns(&s).mul(&ut), u.scale_columns(&inv).mul(&ut))
    }
}

fn check_log_det<R: Real>(s: &[R], log_scale: f64, log_abs_det: f64) -> Result<()> {
    let computed: f64 = s.iter().map(|v| v.lower().ln()).sum::<f64>() + s.len() as f64 * log_scale;
    if !((computed - log_abs_det).abs() <= PRECISION_GUARD * (1.0 + log_abs_det.abs())) {
        return Err(Error::Precision(format!("log|det| drifted from {log_abs_det} to {computed}")));
    }
    Ok(())
}

/// Log singular values of `m · e^{log_scale}`, decreasing, validated against
/// the tracked `log|det|`.
pub(crate) fn log_singular_values<R: Real>(m: &DMat<R>, log_scale: f64, log_abs_det: f64) -> Result<Vec<f64>> {
    let (_, s) = m.svd();
    check_log_det(&s, log_scale, log_abs_det)?;
    Ok(s.iter().map(|v| v.lower().ln() + log_scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Mat {
        Mat::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    fn svd_matches_f64<R: Real>(bits: usize) {
        let a = m(&[&[1.0, 2.0, 0.5], &[-0.3, 1.5, 2.0], &[0.7, -1.0, 1.0]]);
        let (u, s) = DMat::<R>::from_mat(&a, bits).svd();
        let (_, reference) = crate::matgeo::jacobi_svd(&a);
        for (x, y) in s.iter().zip(reference.iter()) {
            assert!((x.lower() - y).abs() < 1e-13);
        }
        let utu = u.transpose().mul(&u).to_mat();
        assert!((utu - Mat::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn svd_matches_f64_on_benign_input() {
        svd_matches_f64::<TwoFloat>(106);
        svd_matches_f64::<BigFloat>(200);
    }

    #[test]
    fn graded_svd_keeps_small_values() {
        // diag(1e20, 1e-20) rotated by a small angle: the small value must survive.
        let (c, s) = (1.0f64 - 0.5e-16, 1e-8);
        let r = m(&[&[c, -s], &[s, c]]);
        let g = &r * m(&[&[1e20, 0.0], &[0.0, 1e-20]]);
        let (_, sv) = DMat::<TwoFloat>::from_mat(&g, 106).svd();
        assert!((sv[1].lower() / 1e-20 - 1.0).abs() < 1e-8, "{}", sv[1].lower());
    }

    #[test]
    fn solve_inverts() {
        let a = m(&[&[4.0, 1.0], &[2.0, 3.0]]);
        let x = DMat::<TwoFloat>::from_mat(&a, 106).solve(&DMat::identity(2, 106)).unwrap().to_mat();
        assert!((&a * x - Mat::identity(2, 2)).amax() < 1e-15);
        assert!(DMat::<BigFloat>::from_mat(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), 200).solve(&DMat::identity(2, 200)).is_err());
    }

    #[test]
    fn midpoint_of_diagonals() {
        let p = DPoint { x: DMat::<BigFloat>::from_mat(&m(&[&[2.0, 0.0], &[0.0, 0.5]]), 200), log_det: 0.0 };
        let o = DPoint::identity(2, 200);
        let mid = o.midpoint(&p).unwrap();
        let pm = mid.x.mul(&mid.x.transpose()).to_mat();
        assert!((pm - m(&[&[2.0, 0.0], &[0.0, 0.5]])).amax() < 1e-15);
        let d = o.vdist(&p).unwrap();
        assert!((d[0] - 4f64.ln()).abs() < 1e-15 && (d[1] + 4f64.ln()).abs() < 1e-15);
        assert!(matches!(o.vdist(&DPoint { log_det: 3.0, ..p }), Err(Error::Precision(_))));
    }

    #[test]
    fn product_rescales() {
        let a = DMat::<TwoFloat>::from_mat(&m(&[&[1e10, 0.0], &[0.0, 1e9]]), 106);
        let mut p = DProduct::identity(2, 106);
        for _ in 0..40 {
            p = p.left_mul(&a);
        }
        let l = log_singular_values(&p.m, p.log_scale, 760.0 * 10f64.ln()).unwrap();
        assert!((l[0] - 400.0 * 10f64.ln()).abs() < 1e-9 && (l[1] - 360.0 * 10f64.ln()).abs() < 1e-9);
    }
}
