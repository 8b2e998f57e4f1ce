//! Seeded random matrices for property suites and experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::matgeo::{log_abs_det, Mat, SpdPoint};
use crate::symdyn::{SymbolicSystem, Word};

/// Matrices with `|det|` below this are redrawn.
pub const MIN_ABS_DET: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn redraw_until_invertible<R: Rng>(rng: &mut R, mut draw: impl FnMut(&mut R) -> Mat) -> Mat {
    loop {
        let m = draw(rng);
        if log_abs_det(&m).map(|l| l.exp() >= MIN_ABS_DET).unwrap_or(false) {
            return m;
        }
    }
}

/// Invertible matrix with independent standard normal entries.
pub fn gaussian_matrix<R: Rng>(rng: &mut R, d: usize) -> Mat {
    redraw_until_invertible(rng, |r| Mat::from_fn(d, d, |_, _| StandardNormal.sample(r)))
}

/// Invertible matrix with entries uniform in `[lo, hi)`.
pub fn uniform_matrix<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> Mat {
    let dist = Uniform::new(lo, hi).expect("lo < hi");
    redraw_until_invertible(rng, |r| Mat::from_fn(d, d, |_, _| dist.sample(r)))
}

/// `I + scale·N` with `N` standard normal.
pub fn near_identity_matrix<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Mat {
    redraw_until_invertible(rng, |r| {
        Mat::identity(d, d) + Mat::from_fn(d, d, |_, _| { let z: f64 = StandardNormal.sample(r); scale * z })
    })
}

/// Positive-definite point `g gᵀ` with `g` Gaussian.
pub fn spd_point<R: Rng>(rng: &mut R, d: usize) -> SpdPoint {
    let g = gaussian_matrix(rng, d);
    let p = &g * g.transpose();
    SpdPoint::new((&p + p.transpose()) * 0.5).expect("g gᵀ is positive definite")
}

/// Uniformly random word over `0..alphabet` (no admissibility filtering).
pub fn random_symbols<R: Rng>(rng: &mut R, alphabet: usize, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random_range(0..alphabet) as u8).collect()
}

/// Admissible word of length `len`, drawn by a uniform random walk on the
/// transition graph. Walks that reach a dead end are restarted.
pub fn admissible_word<R: Rng>(rng: &mut R, system: &SymbolicSystem, len: usize) -> Result<Word> {
    let k = system.alphabet_size();
    for _ in 0..1000 {
        let mut w = vec![rng.random_range(0..k) as u8];
        while w.len() < len {
            let last = *w.last().expect("nonempty");
            let next: Vec<u8> = (0..k as u8).filter(|&b| system.allowed(last, b)).collect();
            if next.is_empty() {
                break;
            }
            w.push(next[rng.random_range(0..next.len())]);
        }
        if w.len() >= len {
            w.truncate(len);
            return Ok(Word(w));
        }
    }
    Err(Error::Precondition(format!("no admissible word of length {len} found")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_draws_repeat() {
        let a = gaussian_matrix(&mut rng(7), 3);
        let b = gaussian_matrix(&mut rng(7), 3);
        assert_eq!(a, b);
        let u = uniform_matrix(&mut rng(1), 2, 0.5, 1.5);
        assert!(u.iter().all(|&x| (0.5..1.5).contains(&x)));
        assert!(log_abs_det(&u).unwrap().exp() >= MIN_ABS_DET);
        let p = spd_point(&mut rng(3), 2);
        assert!(p.log_eigenvalues().as_slice().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn walks_respect_forbidden_transitions() {
        let golden = SymbolicSystem::sft(2, &[[1, 1]]).unwrap();
        let mut r = rng(5);
        for _ in 0..50 {
            let w = admissible_word(&mut r, &golden, 20).unwrap();
            assert_eq!(w.len(), 20);
            assert!(golden.is_admissible(w.symbols()));
        }
    }
}
