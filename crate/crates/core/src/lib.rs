//! Ergodic optimization of Birkhoff averages and Lyapunov exponents.
//!
//! The crate brackets maximal ergodic averages, approximates rotation sets,
//! joint spectral radii and Lyapunov/Morse spectra of one-step matrix
//! cocycles over symbolic bases, and builds adapted metrics by recursive
//! midpoints in the space of positive-definite matrices.

// `!(x > 0.0)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod birkhoff;
pub mod budget;
pub mod cocycle;
mod xprec;
pub mod error;
pub mod matgeo;
pub mod props;
pub mod rotation;
pub mod sampling;
pub mod symdyn;

pub use birkhoff::{BasePoint, Observable};
pub use budget::Budget;
pub use cocycle::{Cocycle, OneStepCocycle, ScaledMatrix, WindowedCocycle};
pub use error::{Error, Result};
pub use matgeo::{ChamberVector, Mat, SpdPoint, ThetaSet};
pub use rotation::{ConvexApprox, VectorObservable};
pub use symdyn::{CirclePoint, Necklace, SymbolicSystem, Word};
